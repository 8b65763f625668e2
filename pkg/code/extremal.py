"""Module to decide when the scl of a chain is realized by an extremal
    surface, from the optimal piece weights of the piece LP.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from logging import debug, info
from typing import Optional

import networkx as nx

from code.bs_words import (
    Chain,
    GroupParams,
    TightWord,
    canonical_key,
    chain_of,
    h_value,
    inverse_word,
    power_word,
    s_value,
)
from code.constants import DEFAULT_POWER_BOUND
from code.encoding import pair_turn
from code.exact_lp import LPModel, solve, verify_optimality
from code.exceptions import GluingConditionError, ResourceLimitError
from code.solver_block import SolverOptions
from code.solver_pieces import PieceSolution, cached_scl


# --------------------------------------------------------------------- #
#                         SUFFICIENT CRITERION                          #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class ExtremalCheck:
    passed: bool
    reasons: tuple[str, ...] = ()

    def __str__(self):
        return "pass" if self.passed else "inconclusive: " + "; ".join(self.reasons)


def _alternating_sum(word: TightWord) -> int:
    return sum((-1) ** j * p for j, (p, _) in enumerate(word.syllables))


def sufficient_extremal_check(chain: Chain, params: GroupParams) -> ExtremalCheck:
    """Word-by-word criterion for a reduced chain to bound an extremal surface.

    For M != +-L every word needs h != 0 or s = 0. For M = L the plain
    exponent sum has to vanish on every word, and for M = -L the alternating
    exponent sum has to vanish on the words with even h.
    """
    reasons = []
    for word in chain.words:
        h = h_value(word)
        if params.M == params.L:
            total = sum(p for p, _ in word.syllables)
            if total != 0:
                reasons.append(f"{word}: exponent sum {total} != 0")
        elif params.M == -params.L:
            if h % 2 == 0 and _alternating_sum(word) != 0:
                reasons.append(f"{word}: alternating exponent sum {_alternating_sum(word)} != 0")
        elif h == 0:
            s = s_value(word, params)
            if s != 0:
                reasons.append(f"{word}: h = 0 and s = {s}")
    return ExtremalCheck(not reasons, tuple(reasons))


# --------------------------------------------------------------------- #
#                           REDUCEDNESS                                 #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class ReducednessResult:
    """reduced, not_reduced (with the witness (i, j, p, q)) or unknown."""

    status: str
    witness: Optional[tuple[int, int, int, int]] = None
    reason: str = ""

    def __str__(self):
        if self.status == "not_reduced":
            i, j, p, q = self.witness
            return f"not reduced: scl(g{i + 1}^{p} + g{j + 1}^{q}) = 0"
        return self.status if not self.reason else f"{self.status}: {self.reason}"


def _vanishes(first: TightWord, p: int, second: TightWord, q: int, params, options) -> bool:
    pair = chain_of((1, power_word(first, p)), (1, power_word(second, q)))
    result = cached_scl(pair, params, options)
    debug("scl(%s) = %s", pair, result)
    return result.value == 0


def check_reducedness(
    chain: Chain,
    params: GroupParams,
    power_bound: int = DEFAULT_POWER_BOUND,
    options: SolverOptions = SolverOptions(),
) -> ReducednessResult:
    """Looks for powers g_i^p, g_j^q of words of the chain with
    scl(g_i^p + g_j^q) = 0.

    When one of h(g_i), h(g_j) is nonzero, only the smallest powers with
    p h(g_i) + q h(g_j) = 0 are tried, since scl is homogeneous. When both
    vanish, every p, q <= power_bound is tried and the answer is unknown if
    none of them vanishes.

    Parameters
    ----------
    chain : Chain
        The chain.
    params : GroupParams
        The group.
    power_bound : int
        Largest power tried for pairs of t-balanced words.
    options : SolverOptions
        Options of the scl solves.

    Returns
    ----------
    ReducednessResult
        The verdict.
    """
    words = chain.words
    exhausted = []
    try:
        for i, first in enumerate(words):
            if h_value(first) == 0 and _vanishes(first, 1, first, 1, params, options):
                return ReducednessResult("not_reduced", (i, i, 1, 1))
            for j in range(i + 1, len(words)):
                second = words[j]
                if canonical_key(second) == canonical_key(inverse_word(first)):
                    return ReducednessResult("not_reduced", (i, j, 1, 1))
                h_i, h_j = h_value(first), h_value(second)
                if h_i == 0 and h_j == 0:
                    found = next(
                        (
                            (p, q)
                            for p in range(1, power_bound + 1)
                            for q in range(1, power_bound + 1)
                            if _vanishes(first, p, second, q, params, options)
                        ),
                        None,
                    )
                    if found is not None:
                        return ReducednessResult("not_reduced", (i, j, *found))
                    exhausted.append((i, j))
                elif h_i * h_j < 0:
                    ratio = Fraction(abs(h_j), abs(h_i))
                    p, q = ratio.numerator, ratio.denominator
                    if _vanishes(first, p, second, q, params, options):
                        return ReducednessResult("not_reduced", (i, j, p, q))
    except ResourceLimitError as err:
        return ReducednessResult("unknown", reason=str(err))
    if exhausted:
        pairs = ", ".join(f"(g{i + 1}, g{j + 1})" for i, j in exhausted)
        return ReducednessResult("unknown", reason=f"powers up to {power_bound} checked for {pairs}")
    return ReducednessResult("reduced")


# --------------------------------------------------------------------- #
#                          BRANCHED SURFACE                             #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class SurfaceComponent:
    nodes: tuple[int, ...]
    balanced: bool
    levels: Optional[dict] = None
    s_value: Optional[Fraction] = None


@dataclass(frozen=True)
class BranchedSurfaceGraph:
    """Pieces of positive weight glued along paired turns.

    An edge u -> v records a turn of u whose pair lies on v, oriented from
    the piece on which the turn adds M to the winding.
    """

    graph: nx.MultiDiGraph
    weights: tuple
    components: tuple[SurfaceComponent, ...]

    @property
    def balanced_components(self) -> tuple[SurfaceComponent, ...]:
        return tuple(component for component in self.components if component.balanced)

    def valence(self, node: int) -> int:
        return self.graph.degree(node)


def _levels(graph: nx.MultiDiGraph, nodes) -> Optional[dict]:
    """An orientation preserving map to the integers, or None."""
    nodes = sorted(nodes)
    levels = {nodes[0]: 0}
    stack = [nodes[0]]
    while stack:
        node = stack.pop()
        neighbours = [(v, levels[node] + 1) for _, v in graph.out_edges(node)]
        neighbours += [(u, levels[node] - 1) for u, _ in graph.in_edges(node)]
        for other, level in neighbours:
            if other not in levels:
                levels[other] = level
                stack.append(other)
            elif levels[other] != level:
                return None
    low = min(levels.values())
    return {node: level - low for node, level in levels.items()}


def branched_surface(solution: PieceSolution, params: GroupParams) -> BranchedSurfaceGraph:
    """Builds the branched surface carried by an optimal piece solution.

    Parameters
    ----------
    solution : PieceSolution
        An optimal solution with positive weights.
    params : GroupParams
        The group.

    Returns
    ----------
    BranchedSurfaceGraph
        Its gluing graph, with balanced components and their s-values.
    """
    if solution.ctx is None or not solution.weights:
        raise ValueError("a branched surface needs an optimal piece solution")
    ctx = solution.ctx
    weights = solution.weights
    totals: dict = {}
    for piece, weight in weights:
        for turn, count in piece.turns:
            totals[turn] = totals.get(turn, 0) + weight * count
    for turn, total in totals.items():
        if total != totals.get(pair_turn(turn, ctx), 0):
            raise GluingConditionError(f"turn {turn} and its pair carry different weights")

    graph = nx.MultiDiGraph()
    graph.add_nodes_from(range(len(weights)))
    for u, (piece, _) in enumerate(weights):
        for turn, _ in piece.turns:
            if ctx.arcs[turn.src].eps_out < 0:
                continue
            partner = pair_turn(turn, ctx)
            for v, (other, _) in enumerate(weights):
                if other.count(partner):
                    graph.add_edge(u, v, key=turn)

    ratio = Fraction(params.m, params.ell)
    components = []
    for nodes in sorted(nx.weakly_connected_components(graph), key=min):
        levels = _levels(graph, nodes)
        if levels is None:
            components.append(SurfaceComponent(tuple(sorted(nodes)), False))
            continue
        s = Fraction(0)
        for node in nodes:
            piece, weight = weights[node]
            arc_winding = sum(ctx.arcs[turn.dst].winding * count for turn, count in piece.turns)
            s += weight * arc_winding * ratio ** levels[node]
        components.append(SurfaceComponent(tuple(sorted(nodes)), True, levels, s))
    info("Branched surface: %d pieces, %d components", len(weights), len(components))
    return BranchedSurfaceGraph(graph, weights, tuple(components))


# --------------------------------------------------------------------- #
#                               VERDICT                                 #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class ExtremalVerdict:
    """exists (with a certificate solution), unknown, or precondition."""

    status: str
    reasons: tuple[str, ...] = ()
    certificate: Optional[PieceSolution] = None
    surface: Optional[BranchedSurfaceGraph] = None

    def to_json(self) -> dict:
        data = {"status": self.status, "reasons": list(self.reasons)}
        if self.surface is not None:
            data["components"] = [
                {
                    "pieces": len(component.nodes),
                    "balanced": component.balanced,
                    "s": None if component.s_value is None else str(component.s_value),
                }
                for component in self.surface.components
            ]
        return data


def _reweight(solution: PieceSolution, surface: BranchedSurfaceGraph, params) -> Optional[PieceSolution]:
    """Moves within the optimal face keeping every weight positive so that
    all balanced components get s = 0."""
    ctx = solution.ctx
    pieces = [piece for piece, _ in surface.weights]
    model = LPModel("extremal", "max")
    for index, piece in enumerate(pieces):
        model.add_variable(f"w{index}:{piece}")
    slack = model.add_variable("t")
    model.set_objective({slack: 1})
    for index in range(len(pieces)):
        model.add_constraint({index: 1, slack: -1}, ">=", 0, f"positive:{index}")
    turns = sorted({turn for piece in pieces for turn, _ in piece.turns})
    for turn in turns:
        partner = pair_turn(turn, ctx)
        if partner <= turn and partner in turns:
            continue
        row = {}
        for index, piece in enumerate(pieces):
            balance = piece.count(turn) - piece.count(partner)
            if balance:
                row[index] = balance
        if row:
            model.add_constraint(row, "=", 0, f"pair:{turn}")
    for loop_index, coef in enumerate(ctx.coefficients):
        first_arc = ctx.loop_starts[loop_index]
        row = {}
        for index, piece in enumerate(pieces):
            leaving = sum(count for turn, count in piece.turns if turn.src == first_arc)
            if leaving:
                row[index] = leaving
        model.add_constraint(row, "=", coef, f"normalize:{loop_index}")
    model.add_constraint({index: 1 for index in range(len(pieces))}, "=", solution.kappa, "optimal")
    ratio = Fraction(params.m, params.ell)
    for number, component in enumerate(surface.balanced_components):
        row = {}
        for node in component.nodes:
            arc_winding = sum(ctx.arcs[t.dst].winding * c for t, c in pieces[node].turns)
            coefficient = arc_winding * ratio ** component.levels[node]
            if coefficient:
                row[node] = coefficient
        if row:
            model.add_constraint(row, "=", 0, f"s:{number}")
    result = solve(model)
    if not result.is_optimal or result.primal[slack] <= 0:
        return None
    if not verify_optimality(model, result):
        raise AssertionError("extremal reweighting LP failed its optimality check")
    weights = tuple((piece, result.primal[index]) for index, piece in enumerate(pieces))
    return replace(solution, weights=weights)


def extremal_verdict(
    chain: Chain,
    params: GroupParams,
    solution: PieceSolution,
    reducedness: Optional[ReducednessResult] = None,
    options: SolverOptions = SolverOptions(),
) -> ExtremalVerdict:
    """Decides, on the face of the optimal solution, whether an extremal
    surface exists. "exists" is always correct; "unknown" may hide one on
    another face.

    Parameters
    ----------
    chain : Chain
        The chain.
    params : GroupParams
        The group.
    solution : PieceSolution
        An optimal piece solution for the chain.
    reducedness : ReducednessResult, optional
        A precomputed reducedness check.
    options : SolverOptions
        Options of the reducedness solves.

    Returns
    ----------
    ExtremalVerdict
        The verdict with its certificate weights.
    """
    reducedness = reducedness or check_reducedness(chain, params, options=options)
    if reducedness.status != "reduced":
        return ExtremalVerdict("precondition", (f"chain is {reducedness}",))
    if params.M in (params.L, -params.L):
        check = sufficient_extremal_check(chain, params)
        if check.passed:
            return ExtremalVerdict("exists", ("exponent sums vanish",), solution)
        return ExtremalVerdict("unknown", check.reasons)
    if solution.result.status != "ok" or not solution.weights:
        return ExtremalVerdict("unknown", (f"no optimal piece solution ({solution.result})",))

    surface = branched_surface(solution, params)
    nonzero = [c for c in surface.balanced_components if c.s_value != 0]
    if not nonzero:
        return ExtremalVerdict("exists", ("every balanced component has s = 0",), solution, surface)
    reweighted = _reweight(solution, surface, params)
    if reweighted is not None:
        return ExtremalVerdict(
            "exists", ("reweighted optimal solution has s = 0",), reweighted, surface
        )
    reasons = tuple(
        f"balanced component of {len(c.nodes)} pieces has s = {c.s_value}" for c in nonzero
    )
    return ExtremalVerdict("unknown", reasons, surface=surface)
