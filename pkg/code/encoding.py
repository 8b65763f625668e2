"""Module to build the combinatorial alphabet shared by the LP encodings:
    winding groups, turn types and their pairing, piece windings, and the
    interval/cut alphabet of the block LP.

    Arcs are numbered globally across the chain, loop after loop, starting
    from 0 (printed as a1, a2, ...).
"""

from collections import Counter, deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from logging import info, warning
from typing import Iterable, Iterator, Mapping, Optional, Union

import networkx as nx

from code.bs_words import Arc, Chain, GroupParams, arcs, complexity, h_value
from code.constants import MAX_CUTS, MAX_DV, MAX_PIECE_CANDIDATES
from code.exceptions import ResourceLimitError
from code.helpers import lcm_of, positive_representative


# --------------------------------------------------------------------- #
#                          WINDING CONTEXT                              #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class WindingContext:
    """Winding data of a chain: complexity rho, |D_v| = d |m|^rho |ell|^rho,
    the edge winding modulus |m|^rho |ell|^rho, and for each arc its W_0
    generator together with the arc table."""

    rho: int
    Dv_abs: int
    We_mod: int
    W0: tuple[int, ...]
    arcs: tuple[Arc, ...]
    loop_starts: tuple[int, ...]
    coefficients: tuple[Fraction, ...]

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    def loop_range(self, loop_index: int) -> range:
        start = self.loop_starts[loop_index]
        return range(start, start + _loop_length(self, loop_index))

    def succ(self, arc: int) -> int:
        """The arc following arc on its loop."""
        loop = self.arcs[arc].loop_index
        start, length = self.loop_starts[loop], _loop_length(self, loop)
        return start + (arc - start + 1) % length

    def pred(self, arc: int) -> int:
        """The arc preceding arc on its loop."""
        loop = self.arcs[arc].loop_index
        start, length = self.loop_starts[loop], _loop_length(self, loop)
        return start + (arc - start - 1) % length

    def total_arc_weight(self) -> Fraction:
        """sum_i r_i A_i, with A_i the number of arcs of loop i."""
        return sum(
            (coef * _loop_length(self, i) for i, coef in enumerate(self.coefficients)),
            Fraction(0),
        )


def _loop_length(ctx: WindingContext, loop_index: int) -> int:
    end = (
        ctx.loop_starts[loop_index + 1]
        if loop_index + 1 < len(ctx.loop_starts)
        else len(ctx.arcs)
    )
    return end - ctx.loop_starts[loop_index]


def _w0_generator(arc: Arc, h: int, params: GroupParams) -> int:
    m, ell = abs(params.m), abs(params.ell)
    if h >= 0:
        return params.d * m ** (arc.mu - h) * ell**arc.lam
    return params.d * m**arc.mu * ell ** (arc.lam + h)


def winding_context(chain: Chain, params: GroupParams, max_dv: int = MAX_DV) -> WindingContext:
    """Computes rho, the per-arc W_0 generators, |D_v| and the edge modulus.

    Parameters
    ----------
    chain : Chain
        A nonempty chain of tight words.
    params : GroupParams
        The group.
    max_dv : int
        Ceiling on |D_v|.

    Returns
    ----------
    WindingContext
        The winding data.
    """
    if not chain.terms:
        raise ValueError("winding_context needs a nonempty chain")
    rho = complexity(chain)
    We_mod = abs(params.m) ** rho * abs(params.ell) ** rho
    Dv_abs = params.d * We_mod
    if Dv_abs > max_dv:
        warning("|D_v| = %d is above the ceiling %d", Dv_abs, max_dv)
        raise ResourceLimitError("Dv_abs", Dv_abs, max_dv)

    all_arcs, W0, loop_starts = [], [], []
    for loop_index, word in enumerate(chain.words):
        loop_starts.append(len(all_arcs))
        h = h_value(word)
        for arc in arcs(word, loop_index):
            all_arcs.append(arc)
            W0.append(_w0_generator(arc, h, params))
    if lcm_of(W0) != Dv_abs:
        raise AssertionError(f"lcm of W_0 generators {W0} differs from |D_v| = {Dv_abs}")
    return WindingContext(
        rho, Dv_abs, We_mod, tuple(W0), tuple(all_arcs), tuple(loop_starts), chain.coefficients
    )


# --------------------------------------------------------------------- #
#                               TURNS                                   #
# --------------------------------------------------------------------- #
@dataclass(frozen=True, order=True)
class TurnType:
    """A turn from the end of arc src to the start of arc dst, labelled by a
    winding class in Z / We_mod."""

    src: int
    wclass: int
    dst: int

    def __str__(self):
        return f"(a{self.src + 1},{self.wclass},a{self.dst + 1})"


@dataclass(frozen=True)
class TurnAlphabet:
    """All turn types of a chain together with the pairing involution."""

    turns: tuple[TurnType, ...]
    pairing: Mapping[TurnType, TurnType]

    def pair(self, turn: TurnType) -> TurnType:
        return self.pairing[turn]

    def from_arc(self, arc: int) -> list[TurnType]:
        return [turn for turn in self.turns if turn.src == arc]

    def arc_pairs(self) -> list[tuple[int, int]]:
        """Directed (src, dst) pairs admitting turns, in order."""
        return sorted({(turn.src, turn.dst) for turn in self.turns})


def turn_exists(ctx: WindingContext, src: int, dst: int) -> bool:
    """A turn from src to dst exists iff eps_out(src) = -eps_in(dst)."""
    return ctx.arcs[src].eps_out == -ctx.arcs[dst].eps_in


def pair_turn(turn: TurnType, ctx: WindingContext) -> TurnType:
    """(a_i, w, a_j) is paired with (pred(a_j), -w, succ(a_i))."""
    return TurnType(ctx.pred(turn.dst), (-turn.wclass) % ctx.We_mod, ctx.succ(turn.src))


def enumerate_turns(chain: Chain, ctx: WindingContext) -> TurnAlphabet:
    """Lists every turn type of the chain and pairs them.

    Parameters
    ----------
    chain : Chain
        The chain the context was built for.
    ctx : WindingContext
        Its winding data.

    Returns
    ----------
    TurnAlphabet
        The turns, ordered by (src, wclass, dst), and the pairing map.
    """
    if len(chain.terms) != len(ctx.loop_starts):
        raise ValueError("the winding context was built for another chain")
    turns = [
        TurnType(src, wclass, dst)
        for src, dst in product(range(ctx.num_arcs), repeat=2)
        if turn_exists(ctx, src, dst)
        for wclass in range(ctx.We_mod)
    ]
    turns.sort()
    pairing = {turn: pair_turn(turn, ctx) for turn in turns}
    return TurnAlphabet(tuple(turns), pairing)


def contribution_multiplier(turn: TurnType, ctx: WindingContext, params: GroupParams) -> int:
    """M when the turn leaves an arc followed by t, L when followed by t^-1."""
    return params.M if ctx.arcs[turn.src].eps_out > 0 else params.L


def turn_contribution(turn: TurnType, ctx: WindingContext, params: GroupParams) -> int:
    """The winding a turn adds to a piece boundary, modulo |D_v|."""
    return (contribution_multiplier(turn, ctx, params) * turn.wclass) % ctx.Dv_abs


TurnMultiset = Union[Mapping[TurnType, int], Iterable[TurnType]]


def as_counter(turns: TurnMultiset) -> Counter:
    return Counter(turns) if not isinstance(turns, Mapping) else Counter(dict(turns))


def piece_winding(turns: TurnMultiset, ctx: WindingContext, params: GroupParams) -> int:
    """Sum over turns of (winding of target arc + turn contribution) mod |D_v|.

    Parameters
    ----------
    turns : Mapping[TurnType, int] | Iterable[TurnType]
        A multiset of turns, as counts or as a sequence with repetitions.
    ctx : WindingContext
        The winding data.
    params : GroupParams
        The group.

    Returns
    ----------
    int
        The residue in [0, |D_v|).
    """
    total = 0
    for turn, count in as_counter(turns).items():
        total += count * (ctx.arcs[turn.dst].winding + turn_contribution(turn, ctx, params))
    return total % ctx.Dv_abs


def boundary_is_zero(turns: TurnMultiset) -> bool:
    """Each arc is entered as often as it is left."""
    balance: Counter = Counter()
    for turn, count in as_counter(turns).items():
        balance[turn.src] -= count
        balance[turn.dst] += count
    return all(value == 0 for value in balance.values())


def support_is_connected(turns: TurnMultiset) -> bool:
    graph = nx.DiGraph()
    for turn, count in as_counter(turns).items():
        if count > 0:
            graph.add_edge(turn.src, turn.dst)
    return graph.number_of_nodes() > 0 and nx.is_weakly_connected(graph)


def winding_is_trivial(
    winding: int, support_arcs: Iterable[int], ctx: WindingContext, setup: int
) -> bool:
    """Setup 2 needs winding = 0 mod |D_v|; Setup 1 needs winding in W_0(a)
    for some arc a on the boundary."""
    if setup == 2:
        return winding % ctx.Dv_abs == 0
    if setup == 1:
        return any(winding % ctx.W0[arc] == 0 for arc in support_arcs)
    raise ValueError(f"setup must be 1 or 2, got {setup}")


def is_disk_like(
    turns: TurnMultiset, ctx: WindingContext, params: GroupParams, setup: int = 2
) -> bool:
    """Whether a turn multiset is the vector of a disk-like piece."""
    counter = as_counter(turns)
    if not counter or not boundary_is_zero(counter) or not support_is_connected(counter):
        return False
    support = {turn.src for turn in counter}
    return winding_is_trivial(piece_winding(counter, ctx, params), support, ctx, setup)


# --------------------------------------------------------------------- #
#                      DISK-LIKE PIECE ENUMERATION                      #
# --------------------------------------------------------------------- #
PieceKey = tuple[tuple[TurnType, int], ...]


def _closing_classes(ctx: WindingContext, params: GroupParams, src: int) -> dict[int, list[int]]:
    """Maps a residue r to the classes w with multiplier * w = r mod |D_v|."""
    multiplier = params.M if ctx.arcs[src].eps_out > 0 else params.L
    classes: dict[int, list[int]] = {}
    for wclass in range(ctx.We_mod):
        classes.setdefault((multiplier * wclass) % ctx.Dv_abs, []).append(wclass)
    return classes


def iter_disklike_pieces(
    ctx: WindingContext,
    params: GroupParams,
    alphabet: TurnAlphabet,
    max_turns: int,
    setup: int = 2,
    costs: Optional[Mapping[TurnType, Fraction]] = None,
    cost_below: Optional[Fraction] = None,
    max_candidates: int = MAX_PIECE_CANDIDATES,
) -> Iterator[PieceKey]:
    """Yields every disk-like piece with at most max_turns turns, once per
    multiset, as a sorted tuple of (turn, count).

    Pieces are produced as closed walks in the turn graph that start at their
    smallest arc. In Setup 2 the class of the closing turn is solved from the
    residue condition instead of being guessed.

    When costs are given, only pieces whose total cost is below cost_below are
    produced, and walks whose partial cost already reaches it are abandoned.
    """
    if max_turns < 1:
        return
    if setup not in (1, 2):
        raise ValueError(f"setup must be 1 or 2, got {setup}")
    if costs is not None and cost_below is None:
        raise ValueError("cost_below is needed together with costs")
    out_turns: dict[int, list[TurnType]] = {}
    for turn in alphabet.turns:
        out_turns.setdefault(turn.src, []).append(turn)
    closing = {arc: _closing_classes(ctx, params, arc) for arc in range(ctx.num_arcs)}
    Dv = ctx.Dv_abs
    seen: set[PieceKey] = set()
    candidates = 0

    def extend(start: int, current: int, walk: list[TurnType], winding: int, spent):
        nonlocal candidates
        if len(walk) + 1 <= max_turns and any(
            t.dst == start for t in out_turns.get(current, ())
        ):
            # close the walk with a turn current -> start
            base = winding + ctx.arcs[start].winding
            multiplier = params.M if ctx.arcs[current].eps_out > 0 else params.L
            if setup == 2:
                options = closing[current].get((-base) % Dv, [])
            else:
                options = range(ctx.We_mod)
            for wclass in options:
                candidates += 1
                if candidates > max_candidates:
                    raise ResourceLimitError("piece candidates", candidates, max_candidates)
                last = TurnType(current, wclass, start)
                total = base + multiplier * wclass
                if setup == 1:
                    support = {t.src for t in walk} | {current}
                    if not winding_is_trivial(total, support, ctx, 1):
                        continue
                if costs is not None and spent + costs[last] >= cost_below:
                    continue
                key = tuple(sorted(Counter(walk + [last]).items()))
                if key not in seen:
                    seen.add(key)
                    yield key
        if len(walk) + 2 > max_turns:
            return
        for turn in out_turns.get(current, ()):
            if turn.dst < start:
                continue
            next_spent = spent
            if costs is not None:
                next_spent = spent + costs[turn]
                if next_spent >= cost_below:
                    continue
            walk.append(turn)
            yield from extend(
                start,
                turn.dst,
                walk,
                (winding + ctx.arcs[turn.dst].winding + turn_contribution(turn, ctx, params)) % Dv,
                next_spent,
            )
            walk.pop()

    for start in range(ctx.num_arcs):
        yield from extend(start, start, [], 0, Fraction(0))
    info("Examined %d closing candidates for %d-turn pieces", candidates, max_turns)


@dataclass(frozen=True)
class PricedPiece:
    """A disk-like piece found by cheapest_disklike_pieces, with its total
    cost and the length of the walk it was read from."""

    cost: Fraction
    turns: PieceKey

    @property
    def turn_count(self) -> int:
        return sum(count for _, count in self.turns)


def walk_length_limit(ctx: WindingContext) -> int:
    """Number of (residue, arc) states. A cheapest disk-like walk of any
    length is matched by one of at most this many turns, unless some closed
    walk of at most this many turns already has negative cost."""
    return ctx.Dv_abs * ctx.num_arcs


def cheapest_disklike_pieces(
    ctx: WindingContext,
    params: GroupParams,
    alphabet: TurnAlphabet,
    costs: Mapping[TurnType, Fraction],
    max_turns: int,
    setup: int = 2,
    cost_below: Optional[Fraction] = None,
) -> list[PricedPiece]:
    """Finds cheap disk-like pieces by dynamic programming over the states
    (winding residue mod |D_v|, current arc) of closed walks in the turn graph.

    For every start arc and every length up to max_turns, the cheapest closed
    walk back to the start arc whose winding is trivial is kept. In Setup 1
    the start arc is the witness: its winding must lie in W_0(start). Every
    disk-like piece has an Euler circuit through its witness arc, so the
    cheapest disk-like piece with at most max_turns turns is always among the
    results. Costs may be negative.

    Parameters
    ----------
    ctx : WindingContext
        The winding data.
    params : GroupParams
        The group.
    alphabet : TurnAlphabet
        Turn types of the chain.
    costs : Mapping[TurnType, Fraction]
        A cost for every turn type.
    max_turns : int
        Longest walk considered.
    setup : int
        1 or 2, the disk-like criterion.
    cost_below : Fraction, optional
        When given, only pieces cheaper than this are returned.

    Returns
    ----------
    list[PricedPiece]
        One entry per distinct turn multiset, cheapest first.
    """
    if setup not in (1, 2):
        raise ValueError(f"setup must be 1 or 2, got {setup}")
    Dv = ctx.Dv_abs
    scale = lcm_of(Fraction(costs[turn]).denominator for turn in alphabet.turns)
    limit = None if cost_below is None else Fraction(cost_below) * scale
    steps: dict[int, list[tuple[TurnType, int, int, int]]] = {}
    for turn in alphabet.turns:
        step = (ctx.arcs[turn.dst].winding + turn_contribution(turn, ctx, params)) % Dv
        steps.setdefault(turn.src, []).append((turn, step, turn.dst, int(costs[turn] * scale)))

    best: dict[PieceKey, int] = {}
    for start in range(ctx.num_arcs):
        modulus = ctx.W0[start] if setup == 1 else Dv
        layers: list[dict[tuple[int, int], tuple]] = [{(0, start): (0, None, None)}]
        for _ in range(max_turns):
            layer: dict[tuple[int, int], tuple] = {}
            for (residue, arc), (spent, _, _) in layers[-1].items():
                for turn, step, dst, cost in steps.get(arc, ()):
                    state = ((residue + step) % Dv, dst)
                    entry = layer.get(state)
                    if entry is None or spent + cost < entry[0]:
                        layer[state] = (spent + cost, (residue, arc), turn)
            if not layer:
                break
            layers.append(layer)
            for residue in range(0, Dv, modulus):
                entry = layer.get((residue, start))
                if entry is None or (limit is not None and entry[0] >= limit):
                    continue
                key = tuple(sorted(Counter(_read_walk(layers, (residue, start))).items()))
                if key not in best or entry[0] < best[key]:
                    best[key] = entry[0]
    priced = [PricedPiece(Fraction(cost, scale), key) for key, cost in best.items()]
    priced.sort(key=lambda piece: (piece.cost, piece.turn_count, piece.turns))
    return priced


def _read_walk(layers: list[dict], state: tuple[int, int]) -> list[TurnType]:
    walk = []
    for depth in range(len(layers) - 1, 0, -1):
        _, state, turn = layers[depth][state]
        walk.append(turn)
    return walk[::-1]


# --------------------------------------------------------------------- #
#                       INTERVALS AND CUTS                              #
# --------------------------------------------------------------------- #
Host = Union[int, TurnType]


@dataclass(frozen=True, order=True)
class IntervalType:
    """The unit interval at position pos (1-based) on an arc or a turn."""

    kind: str
    host: Host
    pos: int
    length: int

    def __str__(self):
        host = f"a{self.host + 1}" if self.kind == "arc" else str(self.host)
        return f"{host}[{self.pos}/{self.length}]"


@dataclass(frozen=True, order=True)
class CutVar:
    """A cut between the k-th and (k+1)-th interval of a block whose first
    interval is I_b."""

    I_b: IntervalType
    I_k: IntervalType
    I_k1: IntervalType
    k: int
    genuine: bool


class IntervalAlphabet:
    """Arc and turn intervals of a chain with the consecutive relation."""

    def __init__(self, ctx: WindingContext, params: GroupParams, alphabet: TurnAlphabet):
        self.Dv_abs = ctx.Dv_abs
        self.intervals: list[IntervalType] = []
        self.first: dict[tuple[str, Host], IntervalType] = {}
        self.last: dict[tuple[str, Host], IntervalType] = {}
        for arc in range(ctx.num_arcs):
            self._add_host("arc", arc, positive_representative(ctx.arcs[arc].winding, ctx.Dv_abs))
        for turn in alphabet.turns:
            contribution = turn_contribution(turn, ctx, params)
            self._add_host("turn", turn, positive_representative(contribution, ctx.Dv_abs))
        self._turns_from = {
            arc: [self.first[("turn", t)] for t in alphabet.turns if t.src == arc]
            for arc in range(ctx.num_arcs)
        }

    def _add_host(self, kind: str, host: Host, length: int):
        for pos in range(1, length + 1):
            interval = IntervalType(kind, host, pos, length)
            self.intervals.append(interval)
            if pos == 1:
                self.first[(kind, host)] = interval
        self.last[(kind, host)] = interval

    def __len__(self):
        return len(self.intervals)

    def host_length(self, kind: str, host: Host) -> int:
        return self.first[(kind, host)].length

    def successors(self, interval: IntervalType) -> list[IntervalType]:
        """Intervals J such that (interval, J) is consecutive."""
        if interval.pos < interval.length:
            return [IntervalType(interval.kind, interval.host, interval.pos + 1, interval.length)]
        if interval.kind == "arc":
            return self._turns_from[interval.host]
        return [self.first[("arc", interval.host.dst)]]

    def junction_out(self, interval: IntervalType) -> tuple:
        """Identifies the set of intervals that may follow this one."""
        if interval.pos < interval.length:
            return ("mid", interval.kind, interval.host, interval.pos)
        if interval.kind == "arc":
            return ("arc_end", interval.host)
        return ("arc_start", interval.host.dst)

    def junction_in(self, interval: IntervalType) -> tuple:
        """Identifies the set of intervals that may precede this one."""
        if interval.pos > 1:
            return ("mid", interval.kind, interval.host, interval.pos - 1)
        if interval.kind == "turn":
            return ("arc_end", interval.host.src)
        return ("arc_start", interval.host)

    def consecutive(self, first: IntervalType, second: IntervalType) -> bool:
        return self.junction_out(first) == self.junction_in(second)

    def gluing_class(self, first: IntervalType, second: IntervalType) -> tuple:
        """Equivalence class of the pair (first, second); the class (x, y)
        can be glued exactly with the class (y, x)."""
        return (self.junction_out(first), self.junction_in(second))


def interval_alphabet(
    chain: Chain,
    ctx: WindingContext,
    params: GroupParams,
    alphabet: Optional[TurnAlphabet] = None,
) -> IntervalAlphabet:
    """Builds the unit intervals of every arc and turn.

    An arc has as many intervals as the representative of its winding in
    {1, ..., |D_v|}; a turn as many as the representative of its contribution.
    """
    alphabet = alphabet or enumerate_turns(chain, ctx)
    return IntervalAlphabet(ctx, params, alphabet)


def generate_cuts(
    chain: Chain,
    ctx: WindingContext,
    params: GroupParams,
    intervals: Optional[IntervalAlphabet] = None,
    max_cuts: int = MAX_CUTS,
) -> list[CutVar]:
    """Lists the cuts (I_b, I_k, I_{k+1}, k, genuine) reachable from the
    start (I_b, I_b, 1) of some block.

    Parameters
    ----------
    chain : Chain
        The chain.
    ctx : WindingContext
        Its winding data.
    params : GroupParams
        The group.
    intervals : IntervalAlphabet, optional
        A prebuilt interval alphabet.
    max_cuts : int
        Ceiling on the number of cuts.

    Returns
    ----------
    list[CutVar]
        The cuts, in breadth-first order from each block start.
    """
    intervals = intervals or interval_alphabet(chain, ctx, params)
    Dv = ctx.Dv_abs
    cuts: list[CutVar] = []

    def emit(cut: CutVar):
        cuts.append(cut)
        if len(cuts) > max_cuts:
            warning("Block LP needs more than %d cuts", max_cuts)
            raise ResourceLimitError("cut variables", len(cuts), max_cuts)

    if Dv == 1:
        for I_b in intervals.intervals:
            emit(CutVar(I_b, I_b, I_b, 1, True))
        return cuts

    for I_b in intervals.intervals:
        seen = {(I_b, 1)}
        queue = deque([(I_b, 1)])
        while queue:
            current, k = queue.popleft()
            targets: list[tuple[IntervalType, bool]] = []
            if k == Dv:
                if intervals.consecutive(current, I_b):
                    targets.append((I_b, False))
                targets.append((I_b, True))
            else:
                targets.extend((J, False) for J in intervals.successors(current))
                if k == 1:
                    targets.extend((J, True) for J in intervals.intervals)
            for J, genuine in targets:
                emit(CutVar(I_b, current, J, k, genuine))
                node = (J, k % Dv + 1)
                if node not in seen:
                    seen.add(node)
                    queue.append(node)
    info("Generated %d cuts over %d intervals", len(cuts), len(intervals))
    return cuts
