"""Module to handle validity testing for the block, winding-state and turn
cost computations."""

from fractions import Fraction
from os import getenv
from unittest import TestCase, main, skipUnless

import numpy as np

from code.bs_words import (
    GroupParams,
    TightWord,
    britton_cyclic_reduce,
    chain_of,
    inverse_word,
    is_t_alternating,
    parse_chain,
    scale_chain,
)
from code.constants import COSTS_PATH
from code.encoding import TurnType
from code.formulas import eg1_chain, eg1_formula, eg2_cost_table, eg3_cost_table
from code.helpers import random_raw_word
from code.solver_block import (
    CostRule,
    CostTable,
    SolverOptions,
    build_winding_lp,
    homology_check,
    load_cost_table,
    scl_block,
    scl_winding,
    verify_turn_costs,
)


SLOW_TESTS = getenv("BS_SCL_SLOW_TESTS") == "1"

EG1_GROUPS = ((2, 4), (3, 6), (4, 6), (6, 9))
EG1_EXPONENTS = (1, 2, 3)


class TestHomology(TestCase):
    """Test cases for the homology condition and the shortcuts."""

    def test_nonzero_t_homology(self):
        """Checks that sum r_i h(g_i) != 0 makes scl infinite."""
        params = GroupParams(2, 3)
        result = scl_winding(parse_chain("a t^2 + T", params), params)
        self.assertTrue(result.infinite)
        self.assertIsNone(result.value)
        self.assertEqual(str(result), "infinite")
        self.assertIn("nonzero t-homology", result.homology_note)

    def test_weighted_homology(self):
        """Checks that coefficients enter the homology condition."""
        params = GroupParams(2, 3)
        self.assertTrue(homology_check(parse_chain("a t^2 + 2 T", params), params).ok)
        self.assertFalse(homology_check(parse_chain("a t^2 + 3 T", params), params).ok)

    def test_a_exponent_note(self):
        """Checks the note reported for M = L when the a-exponent does not
        vanish."""
        params = GroupParams(3, 3)
        check = homology_check(parse_chain("a t A^2 T", params), params)
        self.assertTrue(check.ok)
        self.assertIn("relative to <a>", check.note)

    def test_solvable_group(self):
        """Checks that scl vanishes on BS(1, L) without any LP."""
        params = GroupParams(1, 3)
        result = scl_winding(parse_chain("atAT", params), params)
        self.assertEqual((result.value, result.solver), (0, "solvable"))

    def test_empty_chain(self):
        """Checks that a chain of elliptic words has scl 0."""
        params = GroupParams(2, 3)
        result = scl_block(parse_chain("a^3 + t a^3 T", params), params)
        self.assertEqual((result.value, result.solver), (0, "trivial"))

    def test_solver_options_are_validated(self):
        """Checks unknown solvers and setups."""
        with self.assertRaises(ValueError):
            SolverOptions(solver="simplex")
        with self.assertRaises(ValueError):
            SolverOptions(setup=3)


class TestWindingLP(TestCase):
    """Test cases for the winding-state LP."""

    def test_eg1_family(self):
        """Checks scl(a^k t^2 + 2 t^-1) against 1/2 - gcd(k, d)/(2d)."""
        for M, L in EG1_GROUPS:
            params = GroupParams(M, L)
            for k in EG1_EXPONENTS:
                with self.subTest(M=M, L=L, k=k):
                    result = scl_winding(eg1_chain(params, k), params)
                    self.assertEqual(result.value, eg1_formula(params, k).value)
                    self.assertTrue(result.verified)

    def test_eg1_value(self):
        """Checks scl(a t^2 + 2 t^-1) = 1/4 in BS(2,4)."""
        params = GroupParams(2, 4)
        result = scl_winding(eg1_chain(params, 1), params)
        self.assertEqual(result.value, Fraction(1, 4))
        self.assertEqual((result.rho, result.Dv_abs), (0, 2))

    def test_commutator(self):
        """Checks scl(a t a^-1 t^-1) = 1/12 in BS(2,3)."""
        params = GroupParams(2, 3)
        result = scl_winding(parse_chain("atAT", params), params)
        self.assertEqual(result.value, Fraction(1, 12))
        self.assertEqual(result.Dv_abs, 6)

    def test_word_plus_inverse(self):
        """Checks that g + g^-1 bounds a union of annuli."""
        params = GroupParams(2, 3)
        result = scl_winding(parse_chain("atAT + taTA", params), params)
        self.assertEqual(result.value, 0)

    def test_scaling(self):
        """Checks that scl is homogeneous in the coefficients."""
        params = GroupParams(2, 3)
        result = scl_winding(parse_chain("3/2 atAT", params), params)
        self.assertEqual(result.value, Fraction(1, 8))

    def test_lp_stats(self):
        """Checks that the reported sizes are those of the model."""
        params = GroupParams(2, 3)
        chain = parse_chain("atAT", params)
        model = build_winding_lp(chain, params)
        result = scl_winding(chain, params)
        self.assertEqual(result.lp_stats.variables, model.num_variables)
        self.assertEqual(result.lp_stats.constraints, model.num_constraints)

    def test_random_words_plus_inverses(self):
        """Checks scl(g + g^-1) = 0 on seeded random t-alternating words."""
        params = GroupParams(2, 3)
        rng = np.random.default_rng(5)
        words = []
        for _ in range(2000):
            reduced = britton_cyclic_reduce(random_raw_word(rng, 8, max_exponent=4), params)
            if isinstance(reduced, TightWord) and reduced.n <= 6 and is_t_alternating(reduced):
                words.append(reduced)
            if len(words) == 5:
                break
        self.assertEqual(len(words), 5)
        for word in words:
            with self.subTest(word=str(word)):
                chain = chain_of((1, word), (1, inverse_word(word)))
                self.assertEqual(scl_winding(chain, params).value, 0)

    def test_homogeneity(self):
        """Checks scl(q c) = q scl(c) for atAT in BS(2,3)."""
        params = GroupParams(2, 3)
        chain = parse_chain("atAT", params)
        for factor in (Fraction(2), Fraction(1, 3), Fraction(5, 2)):
            with self.subTest(factor=factor):
                value = scl_winding(scale_chain(chain, factor), params).value
                self.assertEqual(value, factor * Fraction(1, 12))

    def test_nested_words_build(self):
        """Checks that states reached only as targets still get a
        conservation row."""
        for text, params in (("a t^2 A t^-2", GroupParams(2, 3)), ("a t^2 A T + T", GroupParams(4, 6))):
            with self.subTest(chain=text):
                model = build_winding_lp(parse_chain(text, params), params)
                self.assertGreater(model.num_variables, 0)
                self.assertTrue(
                    any(row.name.startswith("flow:") for row in model.constraints)
                )

    def test_eg2(self):
        """Checks scl(a t^2 A t^-1 + t^-1) = 19/48 in BS(4,6)."""
        params = GroupParams(4, 6)
        result = scl_winding(parse_chain("a t^2 A T + T", params), params)
        self.assertEqual(result.value, Fraction(19, 48))

    @skipUnless(SLOW_TESTS, "set BS_SCL_SLOW_TESTS=1 to run")
    def test_eg3(self):
        """Checks scl([a, t^2]) = 5/24 in BS(2,3)."""
        params = GroupParams(2, 3)
        result = scl_winding(parse_chain("a t^2 A t^-2", params), params)
        self.assertEqual(result.value, Fraction(5, 24))


class TestBlockLP(TestCase):
    """Test cases for the block/cut LP."""

    def test_eg1_value(self):
        """Checks that the block LP reproduces scl(a t^2 + 2 t^-1) in BS(2,4)."""
        params = GroupParams(2, 4)
        result = scl_block(eg1_chain(params, 1), params)
        self.assertEqual(result.value, Fraction(1, 4))
        self.assertEqual(result.solver, "block")

    def test_trivial_winding_is_handed_over(self):
        """Checks that |D_v| = 1 is solved by the winding-state LP."""
        params = GroupParams(2, 3)
        result = scl_block(eg1_chain(params, 1), params)
        self.assertEqual(result.solver, "winding")
        self.assertEqual(result.value, 0)

    @skipUnless(SLOW_TESTS, "set BS_SCL_SLOW_TESTS=1 to run")
    def test_agrees_with_winding(self):
        """Checks that both LPs give scl(atAT) in BS(2,3)."""
        params = GroupParams(2, 3)
        chain = parse_chain("atAT", params)
        self.assertEqual(scl_block(chain, params).value, scl_winding(chain, params).value)


class TestTurnCosts(TestCase):
    """Test cases for the cost tables and the lower bound certificates."""

    def test_rules_by_parity(self):
        """Checks that the first matching rule prices a turn."""
        table = eg3_cost_table()
        self.assertEqual(table.cost(TurnType(0, 4, 0)), Fraction(1, 4))
        self.assertEqual(table.cost(TurnType(0, 5, 0)), Fraction(3, 4))
        self.assertEqual(table.cost(TurnType(2, 7, 1)), Fraction(1))
        with self.assertRaises(ValueError):
            CostTable((CostRule(1, 1, "all", Fraction(1)),)).cost(TurnType(1, 0, 0))

    def test_stored_tables(self):
        """Checks that the stored tables agree with the built-in ones."""
        self.assertEqual(
            load_cost_table(COSTS_PATH / "eg3.json").to_json(), eg3_cost_table().to_json()
        )
        self.assertEqual(
            load_cost_table(COSTS_PATH / "eg2.json").to_json(),
            eg2_cost_table(GroupParams(4, 6)).to_json(),
        )

    def test_json_validation(self):
        """Checks that an unknown class selector is refused."""
        with self.assertRaises(ValueError):
            CostTable.from_json({"rules": [{"from": 1, "to": 1, "classes": "prime", "cost": 1}]})

    def test_eg2_certificate(self):
        """Checks the lower bound 19/48 for a t^2 A t^-1 + t^-1 in BS(4,6)."""
        params = GroupParams(4, 6)
        chain = parse_chain("a t^2 A T + T", params)
        certificate = verify_turn_costs(chain, params, eg2_cost_table(params), piece_bound=4)
        self.assertTrue(certificate.certified)
        self.assertEqual(certificate.kappa_bound, Fraction(29, 24))
        self.assertEqual(certificate.lower_bound, Fraction(19, 48))
        self.assertEqual(str(certificate), "lower bound 19/48 certified up to bound 4")

    def test_eg2_certificate_without_bound(self):
        """Checks that the eg2 table prices every disk-like piece at 1 or more."""
        params = GroupParams(4, 6)
        chain = parse_chain("a t^2 A T + T", params)
        certificate = verify_turn_costs(chain, params, eg2_cost_table(params))
        self.assertTrue(certificate.certified)
        self.assertTrue(certificate.complete)
        self.assertEqual(certificate.checked_up_to, 48)
        self.assertEqual(
            str(certificate), "lower bound 19/48 certified for every disk-like piece"
        )

    def test_cheap_pieces_without_bound(self):
        """Checks that zero costs are caught by the unbounded search."""
        params = GroupParams(4, 6)
        chain = parse_chain("a t^2 A T + T", params)
        certificate = verify_turn_costs(
            chain, params, CostTable((), default=Fraction(0)), max_violations=3
        )
        self.assertFalse(certificate.certified)
        self.assertFalse(certificate.complete)
        self.assertEqual(len(certificate.violations), 3)

    def test_cheap_pieces_are_reported(self):
        """Checks that zero costs leave violating pieces."""
        params = GroupParams(4, 6)
        chain = parse_chain("a t^2 A T + T", params)
        certificate = verify_turn_costs(
            chain, params, CostTable((), default=Fraction(0)), piece_bound=4, max_violations=5
        )
        self.assertFalse(certificate.certified)
        self.assertEqual(len(certificate.violations), 5)
        self.assertTrue(all(cost == 0 for _, cost in certificate.violations))

    def test_negative_costs(self):
        """Checks that negative costs are refused."""
        params = GroupParams(4, 6)
        chain = parse_chain("a t^2 A T + T", params)
        with self.assertRaises(ValueError):
            verify_turn_costs(chain, params, CostTable((), default=Fraction(-1)), piece_bound=2)

    def test_obstructed_chain(self):
        """Checks that no bound is claimed for a chain with nonzero
        t-homology."""
        params = GroupParams(4, 6)
        certificate = verify_turn_costs(
            parse_chain("a t^2 A T", params), params, eg2_cost_table(params), piece_bound=2
        )
        self.assertEqual(certificate.status, "obstructed")
        self.assertFalse(certificate.certified)


if __name__ == "__main__":
    main()
