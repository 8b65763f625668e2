"""Module to compute scl through the block/cut linear program, its compact
    winding-state counterpart, and lower bounds from turn costs.

    All solvers maximize the normalized number of disk-like pieces kappa over
    the admissible turn vectors and return
        scl(c) = (sum_i r_i A_i) / 4 - kappa / 2,
    where A_i is the number of arcs of the i-th word.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from logging import info, warning
from pathlib import Path
from typing import Mapping, Optional, Union

import networkx as nx

from code.bs_words import Chain, GroupParams, h_value
from code.constants import (
    AUTO_BLOCK_CUTS,
    DEFAULT_MAX_TURNS,
    DEFAULT_SETUP,
    DEFAULT_SOLVER,
    MAX_CUTS,
    MAX_DV,
    MAX_PIVOTS,
    MAX_TURNS_CAP,
    MAX_WINDING_STATES,
    SOLVER_TAGS,
)
from code.encoding import (
    IntervalAlphabet,
    PieceKey,
    TurnAlphabet,
    TurnType,
    WindingContext,
    enumerate_turns,
    cheapest_disklike_pieces,
    generate_cuts,
    iter_disklike_pieces,
    turn_contribution,
    walk_length_limit,
    winding_context,
)
from code.exact_lp import LPModel, LPSolution, solve, verify_optimality
from code.exceptions import ResourceLimitError
from code.helpers import parse_fraction, timer


# --------------------------------------------------------------------- #
#                           RESULT TYPES                                #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class SolverOptions:
    """Solver choice and resource ceilings for one scl computation."""

    solver: str = DEFAULT_SOLVER
    max_turns: int = DEFAULT_MAX_TURNS
    setup: int = DEFAULT_SETUP
    max_dv: int = MAX_DV
    max_cuts: int = MAX_CUTS
    auto_block_cuts: int = AUTO_BLOCK_CUTS
    max_winding_variables: int = MAX_WINDING_STATES
    max_pivots: int = MAX_PIVOTS
    max_turns_cap: int = MAX_TURNS_CAP

    def __post_init__(self):
        if self.solver not in SOLVER_TAGS:
            raise ValueError(f"solver must be one of {SOLVER_TAGS}, got {self.solver}")
        if self.setup not in (1, 2):
            raise ValueError(f"setup must be 1 or 2, got {self.setup}")
        if self.max_turns < 0:
            raise ValueError(f"max_turns must be nonnegative, got {self.max_turns}")


@dataclass(frozen=True)
class LPStats:
    variables: int = 0
    constraints: int = 0
    pivots: int = 0


@dataclass(frozen=True)
class SclResult:
    """An exact scl value, or the reason there is none."""

    value: Optional[Fraction]
    solver: str
    rho: int = 0
    Dv_abs: int = 1
    lp_stats: LPStats = field(default_factory=LPStats)
    homology_note: str = ""
    status: str = "ok"
    verified: bool = False

    @property
    def infinite(self) -> bool:
        return self.status == "obstructed"

    def __str__(self):
        if self.infinite:
            return "infinite"
        if self.value is None:
            return self.status
        return str(self.value)


@dataclass(frozen=True)
class HomologyCheck:
    ok: bool
    reason: str = ""
    note: str = ""


def homology_check(chain: Chain, params: GroupParams) -> HomologyCheck:
    """A chain bounds a surface iff sum_i r_i h(g_i) = 0.

    For M = L the abelianization also keeps the exponent of a, so the value
    computed relative to <a> is the absolute scl only when that sum vanishes
    as well; the note reports which case holds.
    """
    total = sum((coef * h_value(word) for coef, word in chain.terms), Fraction(0))
    if total != 0:
        return HomologyCheck(False, f"nonzero t-homology: sum r_i h(g_i) = {total}")
    note = "absolute scl equals the computed value"
    if params.M == params.L:
        a_total = sum(
            (coef * sum(p for p, _ in word.syllables) for coef, word in chain.terms),
            Fraction(0),
        )
        if a_total != 0:
            note = (
                f"value is relative to <a>; absolute scl is infinite since the "
                f"a-exponent sum is {a_total}"
            )
    return HomologyCheck(True, "", note)


def shortcut_result(chain: Chain, params: GroupParams, solver: str) -> Optional[SclResult]:
    """Results that need no LP: obstructed, empty and solvable cases."""
    check = homology_check(chain, params)
    if not check.ok:
        return SclResult(None, solver, homology_note=check.reason, status="obstructed")
    if not chain.terms:
        return SclResult(Fraction(0), "trivial", homology_note=check.note, verified=True)
    if params.is_solvable:
        return SclResult(Fraction(0), "solvable", homology_note=check.note, verified=True)
    return None


def _assemble(
    ctx: WindingContext,
    solver: str,
    model: LPModel,
    solution: LPSolution,
    chain: Chain,
    params: GroupParams,
) -> SclResult:
    stats = LPStats(model.num_variables, model.num_constraints, solution.pivots)
    note = homology_check(chain, params).note
    if not solution.is_optimal:
        return SclResult(None, solver, ctx.rho, ctx.Dv_abs, stats, note, solution.status)
    report = verify_optimality(model, solution)
    if not report:
        raise AssertionError(f"{model.name} LP failed its optimality check: {report.violations}")
    value = ctx.total_arc_weight() / 4 - solution.objective_value / 2
    return SclResult(value, solver, ctx.rho, ctx.Dv_abs, stats, note, "ok", True)


def turn_pairs(alphabet: TurnAlphabet):
    for turn in alphabet.turns:
        partner = alphabet.pair(turn)
        if turn < partner:
            yield turn, partner


# --------------------------------------------------------------------- #
#                            BLOCK/CUT LP                               #
# --------------------------------------------------------------------- #
def build_block_lp(
    chain: Chain,
    params: GroupParams,
    ctx: Optional[WindingContext] = None,
    max_cuts: int = MAX_CUTS,
) -> LPModel:
    """Builds the block/cut LP whose optimum is kappa.

    Variables are the reachable cuts (I_b, I_k, I_{k+1}, k, genuine) with
    objective weight 1/|D_v| for a dummy cut and 1/|D_v| - 1/2 for a genuine
    one. Rows close the cuts up into blocks, glue genuine cuts, pair turns,
    and normalize each loop on its first arc.

    Parameters
    ----------
    chain : Chain
        A null-homologous chain.
    params : GroupParams
        The group.
    ctx : WindingContext, optional
        Prebuilt winding data.
    max_cuts : int
        Ceiling on the number of cut variables.

    Returns
    ----------
    LPModel
        The model, to be maximized.
    """
    ctx = ctx or winding_context(chain, params)
    alphabet = enumerate_turns(chain, ctx)
    intervals = IntervalAlphabet(ctx, params, alphabet)
    cuts = generate_cuts(chain, ctx, params, intervals, max_cuts)
    Dv = ctx.Dv_abs

    model = LPModel("block", "max")
    objective = {}
    boundary: dict[tuple, dict[int, int]] = {}
    positive: dict[tuple, list[int]] = {}
    negative: dict[tuple, list[int]] = {}
    right_ends: dict = {}
    for cut in cuts:
        j = model.add_variable(
            f"{'g' if cut.genuine else 'd'}{cut.k}:{cut.I_b}|{cut.I_k}|{cut.I_k1}"
        )
        objective[j] = Fraction(1, Dv) - (Fraction(1, 2) if cut.genuine else 0)
        head = (cut.I_b, cut.I_k1, cut.k % Dv + 1)
        tail = (cut.I_b, cut.I_k, cut.k)
        boundary.setdefault(head, {})[j] = boundary.get(head, {}).get(j, 0) + 1
        boundary.setdefault(tail, {})[j] = boundary.get(tail, {}).get(j, 0) - 1
        if cut.genuine and Dv > 1:
            gluing_class = intervals.gluing_class(cut.I_k, cut.I_k1)
            target = positive if cut.k == 1 else negative
            target.setdefault(gluing_class, []).append(j)
        right_ends.setdefault(cut.I_k1, []).append(j)
    model.set_objective(objective)

    for node, row in boundary.items():
        if any(row.values()):
            model.add_constraint(row, "=", 0, f"block{node[2]}:{node[0]}|{node[1]}")
    for gluing_class in sorted(set(positive) | {(y, x) for x, y in negative}, key=repr):
        row = {j: 1 for j in positive.get(gluing_class, [])}
        for j in negative.get((gluing_class[1], gluing_class[0]), []):
            row[j] = row.get(j, 0) - 1
        if row:
            model.add_constraint(row, "=", 0, f"glue:{gluing_class}")

    def count(kind, host) -> dict[int, int]:
        return {j: 1 for j in right_ends.get(intervals.first[(kind, host)], [])}

    for turn, partner in turn_pairs(alphabet):
        row = count("turn", turn)
        for j in count("turn", partner):
            row[j] = row.get(j, 0) - 1
        if any(row.values()):
            model.add_constraint(row, "=", 0, f"pair:{turn}")
    for loop_index, coef in enumerate(ctx.coefficients):
        model.add_constraint(
            count("arc", ctx.loop_starts[loop_index]), "=", coef, f"normalize:{loop_index}"
        )
    return model


@timer
def scl_block(
    chain: Chain, params: GroupParams, options: SolverOptions = SolverOptions()
) -> SclResult:
    """Computes scl exactly with the block/cut LP.

    When |D_v| = 1 every block is a single interval, the model has no gluing
    rows and its objective is unbounded. The computation is then handed to
    the winding-state LP and the result names "winding" as its solver.
    """
    shortcut = shortcut_result(chain, params, "block")
    if shortcut is not None:
        return shortcut
    ctx = winding_context(chain, params, options.max_dv)
    if ctx.Dv_abs == 1:
        info("|D_v| = 1, solving with the winding-state LP instead")
        return scl_winding(chain, params, options, ctx)
    model = build_block_lp(chain, params, ctx, options.max_cuts)
    return _assemble(ctx, "block", model, solve(model, options.max_pivots), chain, params)


# --------------------------------------------------------------------- #
#                          WINDING-STATE LP                             #
# --------------------------------------------------------------------- #
State = tuple[int, int, int]


def winding_state_graph(
    ctx: WindingContext, params: GroupParams, alphabet: TurnAlphabet
) -> nx.MultiDiGraph:
    """Graph on states (a0, s, a): a piece whose smallest arc is a0 has
    reached the end of arc a with boundary winding s mod |D_v| so far.

    Edges are turns, keyed by the turn type. Only states lying on a closed
    walk through the start (a0, 0, a0) of their layer are kept; such walks
    are exactly the disk-like pieces.
    """
    Dv = ctx.Dv_abs
    out_turns: dict[int, list[TurnType]] = {}
    for turn in alphabet.turns:
        out_turns.setdefault(turn.src, []).append(turn)
    step = {
        turn: ctx.arcs[turn.dst].winding + turn_contribution(turn, ctx, params)
        for turn in alphabet.turns
    }
    graph = nx.MultiDiGraph()
    for a0 in range(ctx.num_arcs):
        layer = nx.MultiDiGraph()
        start = (a0, 0, a0)
        layer.add_node(start)
        frontier = [start]
        while frontier:
            state = frontier.pop()
            _, s, arc = state
            for turn in out_turns.get(arc, ()):
                if turn.dst < a0:
                    continue
                target = (a0, (s + step[turn]) % Dv, turn.dst)
                if target not in layer:
                    frontier.append(target)
                layer.add_edge(state, target, key=turn)
        keep = (nx.descendants(layer, start) & nx.ancestors(layer, start)) | {start}
        graph.update(layer.subgraph(keep))
    return graph


def build_winding_lp(
    chain: Chain,
    params: GroupParams,
    ctx: Optional[WindingContext] = None,
    max_variables: int = MAX_WINDING_STATES,
) -> LPModel:
    """Builds the winding-state LP whose optimum is kappa.

    One variable per edge of the winding-state graph. Rows: conservation at
    every state, equal totals on paired turns, and the normalizing rows.
    The objective counts the flow leaving start states, i.e. disk-like
    pieces.

    Parameters
    ----------
    chain : Chain
        A null-homologous chain.
    params : GroupParams
        The group.
    ctx : WindingContext, optional
        Prebuilt winding data.
    max_variables : int
        Ceiling on the number of edge variables.

    Returns
    ----------
    LPModel
        The model, to be maximized.
    """
    ctx = ctx or winding_context(chain, params)
    alphabet = enumerate_turns(chain, ctx)
    graph = winding_state_graph(ctx, params, alphabet)
    if graph.number_of_edges() > max_variables:
        warning("Winding-state LP needs %d variables", graph.number_of_edges())
        raise ResourceLimitError("winding variables", graph.number_of_edges(), max_variables)

    model = LPModel("winding", "max")
    objective = {}
    conservation: dict[State, dict[int, int]] = {}
    by_turn: dict[TurnType, list[int]] = {}
    for source, target, turn in sorted(graph.edges(keys=True)):
        j = model.add_variable(f"{turn}@{source}")
        if source == (source[0], 0, source[0]):
            objective[j] = 1
        conservation.setdefault(source, {})[j] = -1
        row = conservation.setdefault(target, {})
        row[j] = row.get(j, 0) + 1
        by_turn.setdefault(turn, []).append(j)
    model.set_objective(objective)

    for state in sorted(conservation):
        row = conservation[state]
        if any(row.values()):
            model.add_constraint(row, "=", 0, f"flow:{state}")
    for turn, partner in turn_pairs(alphabet):
        row = {j: 1 for j in by_turn.get(turn, [])}
        for j in by_turn.get(partner, []):
            row[j] = row.get(j, 0) - 1
        if row:
            model.add_constraint(row, "=", 0, f"pair:{turn}")
    for loop_index, coef in enumerate(ctx.coefficients):
        first_arc = ctx.loop_starts[loop_index]
        row = {
            j for turn, indices in by_turn.items() if turn.src == first_arc for j in indices
        }
        model.add_constraint({j: 1 for j in row}, "=", coef, f"normalize:{loop_index}")
    return model


@timer
def scl_winding(
    chain: Chain,
    params: GroupParams,
    options: SolverOptions = SolverOptions(),
    ctx: Optional[WindingContext] = None,
) -> SclResult:
    """Computes scl exactly with the winding-state LP."""
    shortcut = shortcut_result(chain, params, "winding")
    if shortcut is not None:
        return shortcut
    ctx = ctx or winding_context(chain, params, options.max_dv)
    model = build_winding_lp(chain, params, ctx, options.max_winding_variables)
    return _assemble(ctx, "winding", model, solve(model, options.max_pivots), chain, params)


# --------------------------------------------------------------------- #
#                        TURN COSTS AND DUALITY                         #
# --------------------------------------------------------------------- #
CLASS_SELECTORS = ("all", "even", "odd")


@dataclass(frozen=True)
class CostRule:
    """Cost of the turns from arc src to arc dst (1-based labels) whose class
    is selected by classes: "all", "even", "odd" or an explicit list."""

    src: int
    dst: int
    classes: Union[str, tuple[int, ...]]
    cost: Fraction

    def matches(self, turn: TurnType) -> bool:
        if (turn.src + 1, turn.dst + 1) != (self.src, self.dst):
            return False
        if self.classes == "all":
            return True
        if self.classes == "even":
            return turn.wclass % 2 == 0
        if self.classes == "odd":
            return turn.wclass % 2 == 1
        return turn.wclass in self.classes


@dataclass(frozen=True)
class CostTable:
    """Ordered cost rules; the first matching rule prices a turn."""

    rules: tuple[CostRule, ...]
    default: Optional[Fraction] = None
    name: str = ""

    def cost(self, turn: TurnType) -> Fraction:
        for rule in self.rules:
            if rule.matches(turn):
                return rule.cost
        if self.default is None:
            raise ValueError(f"cost table {self.name} has no cost for turn {turn}")
        return self.default

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "default": None if self.default is None else str(self.default),
            "rules": [
                {
                    "from": rule.src,
                    "to": rule.dst,
                    "classes": rule.classes if isinstance(rule.classes, str) else list(rule.classes),
                    "cost": str(rule.cost),
                }
                for rule in self.rules
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CostTable":
        rules = []
        for entry in data.get("rules", []):
            classes = entry.get("classes", "all")
            if isinstance(classes, str):
                if classes not in CLASS_SELECTORS:
                    raise ValueError(f"unknown class selector '{classes}'")
            else:
                classes = tuple(int(c) for c in classes)
            rules.append(
                CostRule(int(entry["from"]), int(entry["to"]), classes, parse_fraction(str(entry["cost"])))
            )
        default = data.get("default")
        return cls(
            tuple(rules),
            None if default is None else parse_fraction(str(default)),
            data.get("name", ""),
        )


def load_cost_table(path: Path) -> CostTable:
    with open(path, "r", encoding="utf-8") as infile:
        return CostTable.from_json(json.load(infile))


def dump_cost_table(table: CostTable, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as outfile:
        json.dump(table.to_json(), outfile, indent=2)
        outfile.write("\n")


@dataclass(frozen=True)
class CostCertificate:
    """Outcome of checking a turn cost table against disk-like pieces."""

    checked_up_to: int
    violations: tuple[tuple[PieceKey, Fraction], ...]
    kappa_bound: Optional[Fraction]
    lower_bound: Optional[Fraction]
    status: str = "ok"
    complete: bool = False

    @property
    def certified(self) -> bool:
        return self.status == "ok" and not self.violations and self.lower_bound is not None

    def __str__(self):
        if self.status != "ok":
            return self.status
        if self.violations:
            return f"{len(self.violations)} disk-like pieces cost less than 1"
        if self.complete:
            return f"lower bound {self.lower_bound} certified for every disk-like piece"
        return f"lower bound {self.lower_bound} certified up to bound {self.checked_up_to}"


def build_turn_lp(
    chain: Chain,
    params: GroupParams,
    ctx: WindingContext,
    alphabet: TurnAlphabet,
    costs: Mapping[TurnType, Fraction],
) -> LPModel:
    """Maximizes sum q_t x_t over turn vectors x >= 0 that close up at every
    arc, pair up, and are normalized on each loop."""
    model = LPModel("turn-costs", "max")
    index = {turn: model.add_variable(str(turn)) for turn in alphabet.turns}
    model.set_objective({index[turn]: costs[turn] for turn in alphabet.turns})
    for arc in range(ctx.num_arcs):
        row: dict[int, int] = {}
        for turn in alphabet.turns:
            if turn.dst == arc:
                row[index[turn]] = row.get(index[turn], 0) + 1
            if turn.src == arc:
                row[index[turn]] = row.get(index[turn], 0) - 1
        if any(row.values()):
            model.add_constraint(row, "=", 0, f"arc:a{arc + 1}")
    for turn, partner in turn_pairs(alphabet):
        model.add_constraint({index[turn]: 1, index[partner]: -1}, "=", 0, f"pair:{turn}")
    for loop_index, coef in enumerate(ctx.coefficients):
        first_arc = ctx.loop_starts[loop_index]
        row = {index[t]: 1 for t in alphabet.turns if t.src == first_arc}
        model.add_constraint(row, "=", coef, f"normalize:{loop_index}")
    return model


@timer
def verify_turn_costs(
    chain: Chain,
    params: GroupParams,
    costs: Union[CostTable, Mapping[TurnType, Fraction]],
    piece_bound: Optional[int] = None,
    setup: int = DEFAULT_SETUP,
    max_dv: int = MAX_DV,
    max_violations: int = 50,
) -> CostCertificate:
    """Certifies a lower bound on scl from nonnegative turn costs.

    If every disk-like piece with at most piece_bound turns costs at least 1,
    kappa is at most K = max sum q_t x_t over the admissible turn vectors,
    hence scl >= (sum_i r_i A_i)/4 - K/2. The claim is only as strong as the
    bound the pieces were checked up to. Without a bound, walks of up to one
    turn per (residue, arc) state are searched; with nonnegative costs a
    cheapest piece is never longer, so the check covers every piece.

    Parameters
    ----------
    chain : Chain
        A null-homologous chain.
    params : GroupParams
        The group.
    costs : CostTable | Mapping[TurnType, Fraction]
        Cost of every turn type.
    piece_bound : int, optional
        Largest number of turns of the pieces that are checked, None for all.
    setup : int
        Disk-like criterion, 1 or 2.
    max_dv : int
        Ceiling on |D_v|.
    max_violations : int
        Number of violating pieces kept in the report.

    Returns
    ----------
    CostCertificate
        Violations, or the implied bounds on kappa and scl.
    """
    if not homology_check(chain, params).ok:
        return CostCertificate(piece_bound or 0, (), None, None, "obstructed")
    ctx = winding_context(chain, params, max_dv)
    alphabet = enumerate_turns(chain, ctx)
    if isinstance(costs, CostTable):
        cost_map = {turn: costs.cost(turn) for turn in alphabet.turns}
    else:
        cost_map = {turn: Fraction(costs[turn]) for turn in alphabet.turns}
    negative = [turn for turn, value in cost_map.items() if value < 0]
    if negative:
        raise ValueError(f"turn costs must be nonnegative, {negative[0]} costs {cost_map[negative[0]]}")

    violations = []
    bound = walk_length_limit(ctx) if piece_bound is None else piece_bound
    cheap = cheapest_disklike_pieces(
        ctx, params, alphabet, cost_map, bound, setup, cost_below=Fraction(1)
    )
    if cheap and piece_bound is not None:
        for piece in iter_disklike_pieces(
            ctx, params, alphabet, piece_bound, setup, costs=cost_map, cost_below=Fraction(1)
        ):
            violations.append((piece, sum((cost_map[t] * n for t, n in piece), Fraction(0))))
            if len(violations) >= max_violations:
                break
    elif cheap:
        violations = [(piece.turns, piece.cost) for piece in cheap[:max_violations]]
    if violations:
        info("Found %d disk-like pieces costing less than 1", len(violations))
        return CostCertificate(bound, tuple(violations), None, None)

    model = build_turn_lp(chain, params, ctx, alphabet, cost_map)
    solution = solve(model)
    if not solution.is_optimal:
        return CostCertificate(bound, (), None, None, solution.status)
    if not verify_optimality(model, solution):
        raise AssertionError("turn cost LP failed its optimality check")
    kappa_bound = solution.objective_value
    lower = ctx.total_arc_weight() / 4 - kappa_bound / 2
    info("Turn costs bound kappa by %s, scl >= %s up to %d turns", kappa_bound, lower, bound)
    return CostCertificate(bound, (), kappa_bound, lower, complete=piece_bound is None)
