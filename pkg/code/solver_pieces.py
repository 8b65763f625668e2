"""Module to compute scl over disk-like pieces by column generation, export
    the resulting admissible surfaces, and dispatch scl queries to a solver.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from logging import debug, info, warning
from typing import Iterable, Optional

from cachetools import LRUCache, cached

from code.bs_words import Chain, GroupParams
from code.constants import (
    DEFAULT_SETUP,
    MAX_NEW_COLUMNS,
    MAX_PIECE_CANDIDATES,
    SOLVE_CACHE_SIZE,
)
from code.encoding import (
    PieceKey,
    TurnAlphabet,
    TurnMultiset,
    TurnType,
    WindingContext,
    as_counter,
    boundary_is_zero,
    cheapest_disklike_pieces,
    enumerate_turns,
    iter_disklike_pieces,
    pair_turn,
    piece_winding,
    support_is_connected,
    walk_length_limit,
    winding_context,
    winding_is_trivial,
)
from code.exact_lp import LPModel, LPSolution, solve, verify_optimality
from code.exceptions import GluingConditionError, ResourceLimitError
from code.helpers import common_denominator, fraction_to_json, timer
from code.solver_block import (
    LPStats,
    SclResult,
    SolverOptions,
    homology_check,
    scl_block,
    scl_winding,
    shortcut_result,
    turn_pairs,
)


# --------------------------------------------------------------------- #
#                               PIECES                                  #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class PieceVector:
    """A piece given by the multiset of turns on its polygonal boundary."""

    turns: PieceKey
    winding: int
    disk_like: bool

    @property
    def turn_count(self) -> int:
        return sum(count for _, count in self.turns)

    def count(self, turn: TurnType) -> int:
        for candidate, count in self.turns:
            if candidate == turn:
                return count
        return 0

    def __str__(self):
        return " + ".join(
            str(turn) if count == 1 else f"{count}{turn}" for turn, count in self.turns
        )


def make_piece(
    turns: TurnMultiset, ctx: WindingContext, params: GroupParams, setup: int = 2
) -> PieceVector:
    """Builds the piece vector of a turn multiset.

    Parameters
    ----------
    turns : Mapping[TurnType, int] | Iterable[TurnType]
        The turns of the piece boundary.
    ctx : WindingContext
        The winding data.
    params : GroupParams
        The group.
    setup : int
        Disk-like criterion, 1 or 2.

    Returns
    ----------
    PieceVector
        The piece, with its winding residue and disk-like flag.
    """
    counter = as_counter(turns)
    if not counter or not boundary_is_zero(counter):
        raise ValueError("a piece must enter every arc as often as it leaves it")
    if not support_is_connected(counter):
        raise ValueError("a piece must have connected support")
    winding = piece_winding(counter, ctx, params)
    support = {turn.src for turn in counter}
    return PieceVector(
        tuple(sorted(counter.items())),
        winding,
        winding_is_trivial(winding, support, ctx, setup),
    )


@timer
def enumerate_disklike_pieces(
    chain: Chain,
    ctx: WindingContext,
    params: GroupParams,
    max_turns: int,
    setup: int = 2,
) -> list[PieceVector]:
    """Lists every disk-like piece with at most max_turns turns, exhaustively
    and once per multiset."""
    alphabet = enumerate_turns(chain, ctx)
    pieces = [
        make_piece(dict(key), ctx, params, setup)
        for key in iter_disklike_pieces(ctx, params, alphabet, max_turns, setup)
    ]
    info("Found %d disk-like pieces with at most %d turns", len(pieces), max_turns)
    return pieces


# --------------------------------------------------------------------- #
#                             PIECE LP                                  #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class PieceSolution:
    """An scl value from a piece LP together with its optimal piece weights.

    certified is set once no disk-like piece of any length improves the
    optimum, so that the value is scl itself and not only an upper bound.
    """

    result: SclResult
    pieces: tuple[PieceVector, ...] = ()
    weights: tuple[tuple[PieceVector, Fraction], ...] = ()
    ctx: Optional[WindingContext] = None
    max_turns: Optional[int] = None
    setup: int = DEFAULT_SETUP
    certified: bool = False

    @property
    def kappa(self) -> Fraction:
        return sum((weight for _, weight in self.weights), Fraction(0))


def build_piece_lp(
    chain: Chain, ctx: WindingContext, pieces: Iterable[PieceVector], feasibility: bool = False
) -> LPModel:
    """Maximizes the total weight of the pieces subject to the gluing and
    normalizing conditions.

    With feasibility set, pieces weigh nothing and every normalizing row gets
    a shortfall variable of weight -1, so the optimum is 0 exactly when some
    weighting of the pieces satisfies all rows.
    """
    pieces = list(pieces)
    alphabet = enumerate_turns(chain, ctx)
    model = LPModel("pieces", "max")
    for index, piece in enumerate(pieces):
        model.add_variable(f"p{index}:{piece}")
    objective = {} if feasibility else {index: 1 for index in range(len(pieces))}
    shortfall = {}
    if feasibility:
        for loop_index in range(len(ctx.coefficients)):
            shortfall[loop_index] = model.add_variable(f"shortfall:{loop_index}")
            objective[shortfall[loop_index]] = -1
    model.set_objective(objective)
    for turn, partner in turn_pairs(alphabet):
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
        if feasibility:
            row[shortfall[loop_index]] = 1
        model.add_constraint(row, "=", coef, f"normalize:{loop_index}")
    return model


def turn_prices(
    model: LPModel, solution: LPSolution, alphabet: TurnAlphabet, ctx: WindingContext
) -> dict[TurnType, Fraction]:
    """Prices every turn type by the dual multipliers of a solved piece LP.

    A piece not yet in the model has reduced cost (its objective) minus the
    sum of the prices of its turns. Rows missing from the model, because no
    column touches them, price at 0.
    """
    duals = {row.name: y for row, y in zip(model.constraints, solution.dual)}
    first_arcs = {arc: loop_index for loop_index, arc in enumerate(ctx.loop_starts)}
    prices = {}
    for turn in alphabet.turns:
        partner = alphabet.pair(turn)
        price = Fraction(0)
        if turn < partner:
            price += duals.get(f"pair:{turn}", 0)
        elif partner < turn:
            price -= duals.get(f"pair:{partner}", 0)
        if turn.src in first_arcs:
            price += duals.get(f"normalize:{first_arcs[turn.src]}", 0)
        prices[turn] = price
    return prices


def solve_piece_lp(
    chain: Chain,
    params: GroupParams,
    pieces: Iterable[PieceVector],
    setup: int = DEFAULT_SETUP,
    ctx: Optional[WindingContext] = None,
    options: SolverOptions = SolverOptions(),
) -> PieceSolution:
    """Solves the column LP over the given pieces.

    Only disk-like pieces count. Since the columns are a subset of all the
    disk-like pieces, the value is an upper bound on scl; it is scl itself
    once the columns contain an optimal decomposition.

    Parameters
    ----------
    chain : Chain
        A null-homologous chain.
    params : GroupParams
        The group.
    pieces : Iterable[PieceVector]
        The candidate columns.
    setup : int
        Disk-like criterion, 1 or 2.
    ctx : WindingContext, optional
        Prebuilt winding data.
    options : SolverOptions
        Resource ceilings.

    Returns
    ----------
    PieceSolution
        The value with the positive piece weights, or the status
        "infeasible_at_bound" when no weighting satisfies the constraints.
    """
    shortcut = shortcut_result(chain, params, "pieces")
    if shortcut is not None:
        return PieceSolution(shortcut, setup=setup, certified=True)
    ctx = ctx or winding_context(chain, params, options.max_dv)
    pieces = tuple(piece for piece in pieces if piece.disk_like)
    model = build_piece_lp(chain, ctx, pieces)
    solution = solve(model, options.max_pivots)
    return _piece_solution(chain, params, ctx, pieces, model, solution, solution.pivots, setup)


def _piece_solution(
    chain: Chain,
    params: GroupParams,
    ctx: WindingContext,
    pieces: tuple[PieceVector, ...],
    model: LPModel,
    solution: LPSolution,
    pivots: int,
    setup: int,
) -> PieceSolution:
    stats = LPStats(model.num_variables, model.num_constraints, pivots)
    note = homology_check(chain, params).note
    if solution.status == "infeasible":
        info("No weighting of %d pieces satisfies the gluing conditions", len(pieces))
        result = SclResult(None, "pieces", ctx.rho, ctx.Dv_abs, stats, note, "infeasible_at_bound")
        return PieceSolution(result, pieces, (), ctx, setup=setup)
    if not solution.is_optimal:
        result = SclResult(None, "pieces", ctx.rho, ctx.Dv_abs, stats, note, solution.status)
        return PieceSolution(result, pieces, (), ctx, setup=setup)
    report = verify_optimality(model, solution)
    if not report:
        raise AssertionError(f"piece LP failed its optimality check: {report.violations}")
    value = ctx.total_arc_weight() / 4 - solution.objective_value / 2
    result = SclResult(value, "pieces", ctx.rho, ctx.Dv_abs, stats, note, "ok", True)
    weights = tuple(
        (piece, weight) for piece, weight in zip(pieces, solution.primal) if weight > 0
    )
    return PieceSolution(result, pieces, weights, ctx, setup=setup)


def _generate_columns(
    chain: Chain,
    params: GroupParams,
    ctx: WindingContext,
    alphabet: TurnAlphabet,
    columns: dict[PieceKey, PieceVector],
    max_turns: int,
    setup: int,
    options: SolverOptions,
    feasibility: bool,
) -> tuple[LPModel, LPSolution, int]:
    """Re-solves the piece LP over columns, each time adding the cheapest
    improving pieces with at most max_turns turns, until none is left.
    Returns the last model, its solution and the pivots spent."""
    threshold = Fraction(0) if feasibility else Fraction(1)
    pivots = 0
    while True:
        model = build_piece_lp(chain, ctx, columns.values(), feasibility)
        solution = solve(model, options.max_pivots)
        pivots += solution.pivots
        if not solution.is_optimal:
            return model, solution, pivots
        prices = turn_prices(model, solution, alphabet, ctx)
        priced = cheapest_disklike_pieces(
            ctx, params, alphabet, prices, max_turns, setup, cost_below=threshold
        )
        fresh = [piece for piece in priced if piece.turns not in columns][:MAX_NEW_COLUMNS]
        if not fresh:
            return model, solution, pivots
        for piece in fresh:
            columns[piece.turns] = make_piece(dict(piece.turns), ctx, params, setup)
        if len(columns) > MAX_PIECE_CANDIDATES:
            raise ResourceLimitError("piece columns", len(columns), MAX_PIECE_CANDIDATES)
        debug("Added %d pieces, %d columns in total", len(fresh), len(columns))


@timer
def scl_pieces(
    chain: Chain,
    params: GroupParams,
    max_turns: int,
    setup: int = DEFAULT_SETUP,
    options: SolverOptions = SolverOptions(),
    initial: Iterable[PieceVector] = (),
) -> PieceSolution:
    """Optimum of the piece LP over all disk-like pieces with at most
    max_turns turns, found by column generation.

    A feasibility pass first looks for columns that satisfy the normalizing
    rows; the status is "infeasible_at_bound" when there are none. The value
    is then maximized, and a final search over walks of every useful length
    decides whether some longer piece would still improve it. Without such a
    piece the solution is certified and the value is scl.

    Parameters
    ----------
    chain : Chain
        A null-homologous chain.
    params : GroupParams
        The group.
    max_turns : int
        Largest number of turns of a piece.
    setup : int
        Disk-like criterion, 1 or 2.
    options : SolverOptions
        Resource ceilings.
    initial : Iterable[PieceVector]
        Columns to start from, for instance those of a smaller bound.

    Returns
    ----------
    PieceSolution
        The value, the columns and the positive piece weights.
    """
    shortcut = shortcut_result(chain, params, "pieces")
    if shortcut is not None:
        return PieceSolution(shortcut, max_turns=max_turns, setup=setup, certified=True)
    ctx = winding_context(chain, params, options.max_dv)
    alphabet = enumerate_turns(chain, ctx)
    columns = {
        piece.turns: piece
        for piece in initial
        if piece.disk_like and piece.turn_count <= max_turns
    }
    model, solution, pivots = _generate_columns(
        chain, params, ctx, alphabet, columns, max_turns, setup, options, feasibility=True
    )
    if solution.is_optimal and solution.objective_value < 0:
        info("No disk-like decomposition with %d turns per piece", max_turns)
        solution = replace(solution, status="infeasible")
    if solution.is_optimal:
        model, solution, more = _generate_columns(
            chain, params, ctx, alphabet, columns, max_turns, setup, options, feasibility=False
        )
        pivots += more
    pieces = tuple(columns.values())
    found = _piece_solution(chain, params, ctx, pieces, model, solution, pivots, setup)
    if found.result.status != "ok":
        return replace(found, max_turns=max_turns)
    limit = max(max_turns, walk_length_limit(ctx))
    longer = cheapest_disklike_pieces(
        ctx,
        params,
        alphabet,
        turn_prices(model, solution, alphabet, ctx),
        limit,
        setup,
        cost_below=Fraction(1),
    )
    if not longer:
        return replace(found, max_turns=max_turns, certified=True)
    # a degenerate dual may price a longer piece below 1 without any gain
    _, unbounded, _ = _generate_columns(
        chain, params, ctx, alphabet, dict(columns), limit, setup, options, feasibility=False
    )
    certified = unbounded.is_optimal and unbounded.objective_value == solution.objective_value
    if not certified:
        info("Pieces longer than %d turns improve the optimum", max_turns)
    return replace(found, max_turns=max_turns, certified=certified)


def scl_pieces_escalating(
    chain: Chain, params: GroupParams, options: SolverOptions = SolverOptions()
) -> PieceSolution:
    """Runs scl_pieces from options.max_turns, doubling the bound while it is
    infeasible or its optimum is not certified, up to options.max_turns_cap.

    An optimum still uncertified at the cap is returned with the status
    "upper_bound".
    """
    max_turns = max(options.max_turns, 1)
    columns: tuple[PieceVector, ...] = ()
    while True:
        solution = scl_pieces(chain, params, max_turns, options.setup, options, columns)
        status = solution.result.status
        if status == "ok" and solution.certified:
            return solution
        if status not in ("ok", "infeasible_at_bound"):
            return solution
        if 2 * max_turns > options.max_turns_cap:
            if status == "ok":
                warning("Piece bound %d reached without a certified optimum", max_turns)
                return replace(solution, result=replace(solution.result, status="upper_bound"))
            return solution
        info("Bound %d gave %s, retrying with %d turns", max_turns, status, 2 * max_turns)
        columns = solution.pieces
        max_turns *= 2


# --------------------------------------------------------------------- #
#                           SURFACE EXPORT                              #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class SurfaceExport:
    """An admissible surface assembled from integral copies of pieces."""

    degree: int
    pieces: tuple[tuple[PieceVector, int], ...]
    turn_counts: tuple[tuple[TurnType, int], ...]
    num_pieces: int
    gluing_loci: int
    chi_hat: int

    @property
    def value(self) -> Fraction:
        return Fraction(-self.chi_hat, 2 * self.degree)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "pieces": [
                {
                    "turns": [
                        {"from": turn.src + 1, "class": turn.wclass, "to": turn.dst + 1, "count": count}
                        for turn, count in piece.turns
                    ],
                    "winding": piece.winding,
                    "multiplicity": multiplicity,
                }
                for piece, multiplicity in self.pieces
            ],
            "turn_counts": [
                {"from": turn.src + 1, "class": turn.wclass, "to": turn.dst + 1, "count": count}
                for turn, count in self.turn_counts
            ],
            "num_pieces": self.num_pieces,
            "gluing_loci": self.gluing_loci,
            "chi_hat": self.chi_hat,
            "value": fraction_to_json(self.value),
        }


def export_surface(solution: PieceSolution, degree_hint: Optional[int] = None) -> SurfaceExport:
    """Clears denominators of the optimal piece weights.

    Parameters
    ----------
    solution : PieceSolution
        An optimal piece solution.
    degree_hint : int, optional
        A preferred degree; used when it is a multiple of the least degree.

    Returns
    ----------
    SurfaceExport
        Multiplicities, per-turn counts and the Euler characteristic data.
    """
    if solution.ctx is None or not solution.weights:
        raise ValueError("only an optimal piece solution with positive weights can be exported")
    ctx = solution.ctx
    degree = common_denominator(
        [weight for _, weight in solution.weights] + list(ctx.coefficients)
    )
    if degree_hint is not None:
        if degree_hint % degree:
            warning("Degree %d is not a multiple of %d, using %d", degree_hint, degree, degree)
        else:
            degree = degree_hint
    pieces = tuple(
        (piece, int(weight * degree)) for piece, weight in solution.weights
    )
    counts: dict[TurnType, int] = {}
    for piece, multiplicity in pieces:
        for turn, count in piece.turns:
            counts[turn] = counts.get(turn, 0) + multiplicity * count
    for turn in counts:
        partner = pair_turn(turn, ctx)
        if counts.get(turn, 0) != counts.get(partner, 0):
            raise GluingConditionError(
                f"turn {turn} is used {counts.get(turn, 0)} times but its pair "
                f"{partner} {counts.get(partner, 0)} times"
            )
    num_pieces = sum(multiplicity for _, multiplicity in pieces)
    total_turns = sum(counts.values())
    if total_turns != degree * ctx.total_arc_weight():
        raise GluingConditionError(
            f"surface has {total_turns} turns, expected {degree * ctx.total_arc_weight()}"
        )
    gluing_loci = total_turns // 2
    return SurfaceExport(
        degree,
        pieces,
        tuple(sorted(counts.items())),
        num_pieces,
        gluing_loci,
        num_pieces - gluing_loci,
    )


# --------------------------------------------------------------------- #
#                           SOLVER DISPATCH                             #
# --------------------------------------------------------------------- #
def scl(chain: Chain, params: GroupParams, options: SolverOptions = SolverOptions()) -> SclResult:
    """Computes scl of a chain with the solver named in options.

    With "auto", small block/cut models are solved literally, larger ones
    through the winding-state LP, and the piece oracle with escalating
    max_turns takes over once that model outgrows its ceiling.

    Parameters
    ----------
    chain : Chain
        The chain.
    params : GroupParams
        The group.
    options : SolverOptions
        Solver tag and resource ceilings.

    Returns
    ----------
    SclResult
        The exact value or a status.
    """
    if options.solver == "block":
        return scl_block(chain, params, options)
    if options.solver == "winding":
        return scl_winding(chain, params, options)
    if options.solver == "pieces":
        return scl_pieces_escalating(chain, params, options).result

    shortcut = shortcut_result(chain, params, "auto")
    if shortcut is not None:
        return shortcut
    ctx = winding_context(chain, params, options.max_dv)
    if ctx.Dv_abs > 1:
        try:
            small = replace(options, max_cuts=min(options.auto_block_cuts, options.max_cuts))
            return scl_block(chain, params, small)
        except ResourceLimitError as err:
            if err.limit != "cut variables":
                raise
            info("Block LP too large for auto, using the winding-state LP")
    try:
        return scl_winding(chain, params, options, ctx)
    except ResourceLimitError as err:
        if err.limit != "winding variables":
            raise
        info("Winding-state LP too large, falling back to the piece oracle")
    return scl_pieces_escalating(chain, params, options).result


@cached(cache=LRUCache(maxsize=SOLVE_CACHE_SIZE))
def cached_scl(
    chain: Chain, params: GroupParams, options: SolverOptions = SolverOptions()
) -> SclResult:
    """Memoized scl, keyed by the chain, the group and the options."""
    return scl(chain, params, options)
