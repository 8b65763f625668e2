"""Module to handle validity testing for the piece LP, the surface export and
the solver dispatch."""

from fractions import Fraction
from os import getenv
from unittest import TestCase, main, skipUnless

from code.bs_words import GroupParams, parse_chain
from code.encoding import TurnType, enumerate_turns, winding_context
from code.exact_lp import solve
from code.exceptions import GluingConditionError
from code.solver_block import SolverOptions
from code.solver_pieces import (
    PieceSolution,
    build_piece_lp,
    cached_scl,
    enumerate_disklike_pieces,
    export_surface,
    make_piece,
    scl,
    scl_pieces,
    scl_pieces_escalating,
    solve_piece_lp,
    turn_prices,
)


EG2 = ("a t^2 A T + T", GroupParams(4, 6))
EG3 = ("a t^2 A t^-2", GroupParams(2, 3))
SLOW_TESTS = getenv("BS_SCL_SLOW_TESTS") == "1"

# arcs a1..a4 are 0..3; the class -1 is written as its residue
EG2_PIECES = (
    {TurnType(1, 0, 3): 1, TurnType(3, 0, 1): 1},
    {TurnType(1, 0, 0): 1, TurnType(0, 0, 3): 1, TurnType(3, 0, 2): 1, TurnType(2, 0, 1): 1},
    {TurnType(0, 0, 0): 4},
    {TurnType(2, 0, 2): 6},
)
EG3_PIECES = (
    {TurnType(0, 0, 0): 1, TurnType(0, 1, 0): 1},
    {TurnType(1, 0, 3): 1, TurnType(3, 0, 1): 1},
    {TurnType(1, 1, 3): 1, TurnType(1, 2, 3): 1, TurnType(3, 35, 1): 2},
    {TurnType(2, 0, 2): 1, TurnType(2, 35, 2): 2},
    {TurnType(2, 34, 2): 1, TurnType(2, 0, 2): 2},
    {TurnType(2, 35, 2): 1, TurnType(2, 34, 2): 2},
)


def _setup_one_solution(example, turn_sets) -> PieceSolution:
    text, params = example
    chain = parse_chain(text, params)
    ctx = winding_context(chain, params)
    pieces = [make_piece(turns, ctx, params, setup=1) for turns in turn_sets]
    return solve_piece_lp(chain, params, pieces, setup=1, ctx=ctx)


class TestPieces(TestCase):
    """Test cases for piece vectors."""

    def test_setup_changes_disk_likeness(self):
        """Checks a piece that is disk-like in Setup 1 only."""
        text, params = EG3
        ctx = winding_context(parse_chain(text, params), params)
        self.assertTrue(make_piece(EG3_PIECES[0], ctx, params, setup=1).disk_like)
        piece = make_piece(EG3_PIECES[0], ctx, params, setup=2)
        self.assertFalse(piece.disk_like)
        self.assertEqual(piece.winding, 4)
        self.assertEqual(piece.turn_count, 2)
        self.assertEqual(piece.count(TurnType(0, 1, 0)), 1)
        self.assertEqual(piece.count(TurnType(0, 2, 0)), 0)

    def test_invalid_pieces(self):
        """Checks open and disconnected turn multisets."""
        text, params = EG2
        ctx = winding_context(parse_chain(text, params), params)
        with self.assertRaises(ValueError):
            make_piece([TurnType(0, 0, 3)], ctx, params)
        with self.assertRaises(ValueError):
            make_piece({TurnType(0, 0, 0): 1, TurnType(2, 0, 2): 1}, ctx, params)

    def test_enumeration(self):
        """Checks that enumerated pieces are disk-like and within the bound."""
        text, params = EG2
        chain = parse_chain(text, params)
        ctx = winding_context(chain, params)
        pieces = enumerate_disklike_pieces(chain, ctx, params, max_turns=3)
        self.assertTrue(pieces)
        self.assertTrue(all(piece.disk_like and piece.turn_count <= 3 for piece in pieces))


class TestPieceLP(TestCase):
    """Test cases for the column LP over disk-like pieces."""

    def test_eg2_surface(self):
        """Checks the four-piece surface of a t^2 A t^-1 + t^-1 in BS(4,6)."""
        solution = _setup_one_solution(EG2, EG2_PIECES)
        self.assertEqual(solution.result.value, Fraction(19, 48))
        self.assertEqual(solution.kappa, Fraction(29, 24))
        self.assertEqual(
            [weight for _, weight in solution.weights],
            [Fraction(1, 2), Fraction(1, 2), Fraction(1, 8), Fraction(1, 12)],
        )

    def test_eg3_surface(self):
        """Checks the six-piece surface of [a, t^2] in BS(2,3)."""
        solution = _setup_one_solution(EG3, EG3_PIECES)
        self.assertEqual(solution.result.value, Fraction(5, 24))
        self.assertEqual(solution.kappa, Fraction(19, 12))
        self.assertTrue(solution.result.verified)

    def test_setup_two_drops_pieces(self):
        """Checks that the Setup 1 pieces of [a, t^2] cannot be glued in
        Setup 2."""
        text, params = EG3
        chain = parse_chain(text, params)
        ctx = winding_context(chain, params)
        pieces = [make_piece(turns, ctx, params, setup=2) for turns in EG3_PIECES]
        solution = solve_piece_lp(chain, params, pieces, ctx=ctx)
        self.assertEqual(solution.result.status, "infeasible_at_bound")
        self.assertIsNone(solution.result.value)

    def test_commutator(self):
        """Checks scl(atAT) = 1/12 in BS(2,3) from pieces of three turns."""
        params = GroupParams(2, 3)
        solution = scl_pieces(parse_chain("atAT", params), params, max_turns=3)
        self.assertEqual(solution.result.value, Fraction(1, 12))
        self.assertEqual(solution.max_turns, 3)
        self.assertTrue(solution.certified)

    def test_infeasible_at_bound(self):
        """Checks that one-turn pieces cannot realize a t^2 A t^-1 + t^-1."""
        text, params = EG2
        solution = scl_pieces(parse_chain(text, params), params, max_turns=1)
        self.assertEqual(solution.result.status, "infeasible_at_bound")
        self.assertEqual(solution.weights, ())

    def test_escalation_stops_at_the_cap(self):
        """Checks that max_turns is doubled up to the cap."""
        text, params = EG2
        options = SolverOptions(solver="pieces", max_turns=1, max_turns_cap=2)
        solution = scl_pieces_escalating(parse_chain(text, params), params, options)
        self.assertEqual(solution.result.status, "infeasible_at_bound")
        self.assertEqual(solution.max_turns, 2)


class TestColumnGeneration(TestCase):
    """Test cases for pricing new pieces into the column LP."""

    def test_eg2_from_default_bound(self):
        """Checks that the default options find the four-piece optimum of
        a t^2 A t^-1 + t^-1 without being handed any piece."""
        text, params = EG2
        solution = scl_pieces_escalating(parse_chain(text, params), params)
        self.assertEqual(solution.result.status, "ok")
        self.assertTrue(solution.certified)
        self.assertEqual(solution.result.value, Fraction(19, 48))
        self.assertEqual(solution.kappa, Fraction(29, 24))

    def test_short_pieces_are_not_certified(self):
        """Checks that pieces of three turns do not reach scl([a, t^2])."""
        text, params = EG3
        solution = scl_pieces(parse_chain(text, params), params, max_turns=3, setup=1)
        self.assertFalse(solution.certified)
        if solution.result.value is not None:
            self.assertGreaterEqual(solution.result.value, Fraction(2, 9))

    @skipUnless(SLOW_TESTS, "set BS_SCL_SLOW_TESTS=1 to run")
    def test_eg3_escalation(self):
        """Checks that doubling three turns to six certifies scl([a, t^2]) = 5/24."""
        text, params = EG3
        options = SolverOptions(solver="pieces", max_turns=3)
        solution = scl_pieces_escalating(parse_chain(text, params), params, options)
        self.assertEqual(solution.result.value, Fraction(5, 24))
        self.assertTrue(solution.certified)
        self.assertEqual(solution.max_turns, 6)

    def test_reduced_costs(self):
        """Checks that no column of the final LP prices below its weight and
        that weighted columns price exactly at it."""
        params = GroupParams(2, 3)
        chain = parse_chain("atAT", params)
        found = scl_pieces(chain, params, max_turns=3)
        model = build_piece_lp(chain, found.ctx, found.pieces)
        solution = solve(model)
        prices = turn_prices(model, solution, enumerate_turns(chain, found.ctx), found.ctx)
        for piece, weight in zip(found.pieces, solution.primal):
            total = sum(prices[turn] * count for turn, count in piece.turns)
            self.assertGreaterEqual(total, 1)
            if weight > 0:
                self.assertEqual(total, 1)
        self.assertTrue(found.weights)

    def test_initial_columns(self):
        """Checks that starting from known pieces gives the same value."""
        text, params = EG2
        chain = parse_chain(text, params)
        ctx = winding_context(chain, params)
        initial = [make_piece(turns, ctx, params, setup=1) for turns in EG2_PIECES]
        seeded = scl_pieces(chain, params, max_turns=6, initial=initial)
        self.assertEqual(seeded.result.value, Fraction(19, 48))
        self.assertTrue(seeded.certified)
        self.assertEqual(
            seeded.result.value, scl_pieces(chain, params, max_turns=6).result.value
        )


class TestSurfaceExport(TestCase):
    """Test cases for clearing denominators of piece weights."""

    def test_eg2_least_degree(self):
        """Checks the least degree and the Euler characteristic."""
        surface = export_surface(_setup_one_solution(EG2, EG2_PIECES))
        self.assertEqual(surface.degree, 24)
        self.assertEqual([count for _, count in surface.pieces], [12, 12, 3, 2])
        self.assertEqual((surface.num_pieces, surface.gluing_loci), (29, 48))
        self.assertEqual(surface.chi_hat, -19)
        self.assertEqual(surface.value, Fraction(19, 48))

    def test_eg2_degree_hint(self):
        """Checks that a multiple of the least degree can be requested."""
        solution = _setup_one_solution(EG2, EG2_PIECES)
        surface = export_surface(solution, degree_hint=48)
        self.assertEqual([count for _, count in surface.pieces], [24, 24, 6, 4])
        self.assertEqual(export_surface(solution, degree_hint=50).degree, 24)

    def test_eg3_degree(self):
        """Checks degree 36 and the multiplicities of the six pieces."""
        surface = export_surface(_setup_one_solution(EG3, EG3_PIECES))
        self.assertEqual(surface.degree, 36)
        self.assertEqual([count for _, count in surface.pieces], [18, 18, 9, 4, 7, 1])
        self.assertEqual(surface.num_pieces, 57)
        self.assertEqual(surface.gluing_loci, 72)
        self.assertEqual(surface.to_json()["value"], {"num": 5, "den": 24})

    def test_unpaired_weights(self):
        """Checks that weights violating the gluing condition are refused."""
        solution = _setup_one_solution(EG2, EG2_PIECES)
        broken = PieceSolution(
            solution.result,
            solution.pieces,
            ((solution.weights[0][0], Fraction(1)),),
            solution.ctx,
        )
        with self.assertRaises(GluingConditionError):
            export_surface(broken)

    def test_nothing_to_export(self):
        """Checks that an infeasible solution cannot be exported."""
        text, params = EG2
        with self.assertRaises(ValueError):
            export_surface(scl_pieces(parse_chain(text, params), params, max_turns=1))


class TestDispatch(TestCase):
    """Test cases for the solver dispatch and its cache."""

    def test_auto(self):
        """Checks that the automatic choice solves atAT exactly."""
        params = GroupParams(2, 3)
        result = scl(parse_chain("atAT", params), params)
        self.assertEqual(result.value, Fraction(1, 12))
        self.assertIn(result.solver, ("block", "winding"))

    def test_named_solvers(self):
        """Checks that every named solver agrees on a small chain."""
        params = GroupParams(2, 4)
        chain = parse_chain("a t^2 + 2 T", params)
        for solver in ("block", "winding", "pieces"):
            with self.subTest(solver=solver):
                self.assertEqual(scl(chain, params, SolverOptions(solver=solver)).value, Fraction(1, 4))

    def test_obstructed(self):
        """Checks that the dispatch reports nonzero t-homology."""
        params = GroupParams(2, 3)
        self.assertTrue(scl(parse_chain("at", params), params).infinite)

    def test_auto_without_blocks(self):
        """Checks that |D_v| = 1 is handed to the winding-state LP."""
        params = GroupParams(2, 3)
        result = scl(parse_chain("a t^2 + 2 T", params), params)
        self.assertEqual(result.value, 0)
        self.assertEqual(result.solver, "winding")

    def test_auto_large_blocks(self):
        """Checks that auto solves a t^2 A t^-1 + t^-1 through winding states."""
        text, params = EG2
        result = scl(parse_chain(text, params), params)
        self.assertEqual(result.value, Fraction(19, 48))
        self.assertEqual(result.solver, "winding")

    def test_block_and_pieces_agree(self):
        """Checks that the literal block LP and the piece oracle give 1/8 for
        atAT in BS(2,4)."""
        params = GroupParams(2, 4)
        chain = parse_chain("atAT", params)
        block = scl(chain, params, SolverOptions(solver="block"))
        pieces = scl(chain, params, SolverOptions(solver="pieces"))
        self.assertEqual(block.value, Fraction(1, 8))
        self.assertEqual(pieces.value, block.value)

    def test_cache(self):
        """Checks that a repeated query is answered from the cache."""
        params = GroupParams(2, 3)
        first = cached_scl(parse_chain("atAT", params), params)
        self.assertIs(cached_scl(parse_chain("atAT", params), params), first)


if __name__ == "__main__":
    main()
