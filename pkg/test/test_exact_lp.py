"""Module to handle validity testing for the exact simplex solver."""

from fractions import Fraction
from unittest import TestCase, main

import numpy as np

from code.bs_words import GroupParams, parse_chain
from code.exact_lp import LPModel, LPSolution, dumps_model, solve, verify_optimality
from code.exceptions import ResourceLimitError
from code.solver_block import build_winding_lp


def _two_variable_model() -> LPModel:
    model = LPModel("small", "max")
    x, y = model.add_variable("x"), model.add_variable("y")
    model.add_constraint({x: 1, y: 2}, "<=", 4, "first")
    model.add_constraint({x: 3, y: 1}, "<=", 6, "second")
    model.set_objective({x: 1, y: 1})
    return model


def _beale_model() -> LPModel:
    """The classical example on which Dantzig's rule cycles."""
    model = LPModel("beale", "min")
    x4, x5, x6, x7 = (model.add_variable(name) for name in ("x4", "x5", "x6", "x7"))
    model.add_constraint({x4: Fraction(1, 4), x5: -8, x6: -1, x7: 9}, "<=", 0)
    model.add_constraint({x4: Fraction(1, 2), x5: -12, x6: Fraction(-1, 2), x7: 3}, "<=", 0)
    model.add_constraint({x6: 1}, "<=", 1)
    model.set_objective({x4: Fraction(-3, 4), x5: 20, x6: Fraction(-1, 2), x7: 6})
    return model


def _commutator_model() -> LPModel:
    params = GroupParams(2, 3)
    return build_winding_lp(parse_chain("atAT", params), params)


def _rebuilt(model: LPModel, columns, rows, scale=Fraction(1)) -> LPModel:
    """Copies a model with its variables and rows reordered and every rhs
    multiplied by scale."""
    position = {old: new for new, old in enumerate(columns)}
    copy = LPModel(model.name, model.sense)
    for old in columns:
        copy.add_variable(model.variable_names[old])
    for index in rows:
        row = model.constraints[index]
        copy.add_constraint(
            {position[j]: a for j, a in row.coefficients}, row.relation, row.rhs * scale, row.name
        )
    copy.set_objective({position[j]: c for j, c in model.objective.items()})
    return copy


class TestExactLP(TestCase):
    """Test cases for the exact revised simplex method."""

    def test_vertex_optimum(self):
        """Checks an optimum with fractional coordinates."""
        solution = solve(_two_variable_model())
        self.assertTrue(solution.is_optimal)
        self.assertEqual(solution.primal, (Fraction(8, 5), Fraction(6, 5)))
        self.assertEqual(solution.objective_value, Fraction(14, 5))

    def test_certificate_of_optimum(self):
        """Checks that the returned duals certify the optimum."""
        model = _two_variable_model()
        report = verify_optimality(model, solve(model))
        self.assertTrue(report)
        self.assertEqual(report.violations, ())

    def test_tampered_solution_is_refused(self):
        """Checks that a feasible but suboptimal point fails the check."""
        model = _two_variable_model()
        fake = LPSolution("optimal", (Fraction(1), Fraction(1)), (Fraction(0), Fraction(0)), Fraction(2))
        report = verify_optimality(model, fake)
        self.assertFalse(report)
        self.assertTrue(any("reduced cost" in violation for violation in report.violations))

    def test_minimization_with_equalities(self):
        """Checks a min model mixing "=" and ">=" rows."""
        model = LPModel("mixed", "min")
        x, y, z = (model.add_variable(name) for name in "xyz")
        model.add_constraint({x: 1, y: 1, z: 1}, "=", 1)
        model.add_constraint({x: 1, y: -1}, ">=", Fraction(1, 3))
        model.set_objective({x: 2, y: 1, z: 3})
        solution = solve(model)
        self.assertEqual(solution.objective_value, Fraction(5, 3))
        self.assertTrue(verify_optimality(model, solution))

    def test_infeasible_model(self):
        """Checks that contradictory rows give the infeasible status."""
        model = LPModel("infeasible")
        x = model.add_variable("x")
        model.add_constraint({x: 1}, ">=", 2)
        model.add_constraint({x: 1}, "<=", 1)
        model.set_objective({x: 1})
        self.assertEqual(solve(model).status, "infeasible")

    def test_unbounded_model(self):
        """Checks that an open direction gives the unbounded status."""
        model = LPModel("unbounded")
        x, y = model.add_variable("x"), model.add_variable("y")
        model.add_constraint({x: 1, y: -1}, "<=", 1)
        model.set_objective({x: 1})
        self.assertEqual(solve(model).status, "unbounded")

    def test_degenerate_model_terminates(self):
        """Checks that a cycling-prone model is solved."""
        model = _beale_model()
        solution = solve(model)
        self.assertEqual(solution.objective_value, Fraction(-5, 4))
        self.assertTrue(verify_optimality(model, solution))

    def test_pivot_ceiling(self):
        """Checks that the pivot ceiling raises a resource error."""
        with self.assertRaises(ResourceLimitError) as ctx:
            solve(_two_variable_model(), max_pivots=0)
        self.assertEqual(ctx.exception.limit, "simplex pivots")

    def test_model_validation(self):
        """Checks duplicate names, unknown relations and unknown variables."""
        model = LPModel()
        x = model.add_variable("x")
        with self.assertRaises(ValueError):
            model.add_variable("x")
        with self.assertRaises(ValueError):
            model.add_constraint({x: 1}, "<", 1)
        with self.assertRaises(ValueError):
            model.add_constraint({x + 1: 1}, "<=", 1)
        with self.assertRaises(ValueError):
            LPModel(sense="maximize")

    def test_text_dump(self):
        """Checks the header, objective and row lines of a dump."""
        lines = dumps_model(_two_variable_model()).splitlines()
        self.assertEqual(lines[0], "# lp small: 2 variables, 2 constraints")
        self.assertEqual(lines[1], "max: 1 x + 1 y")
        self.assertEqual(lines[2], "first: 1 x + 2 y <= 4")
        self.assertEqual(lines[-1], "var 1 y")

    def test_permuted_model(self):
        """Checks that reordering rows and columns keeps the optimum."""
        model = _commutator_model()
        expected = solve(model).objective_value
        rng = np.random.default_rng(11)
        for _ in range(3):
            columns = [int(j) for j in rng.permutation(model.num_variables)]
            rows = [int(i) for i in rng.permutation(model.num_constraints)]
            shuffled = _rebuilt(model, columns, rows)
            solution = solve(shuffled)
            self.assertEqual(solution.objective_value, expected)
            self.assertTrue(verify_optimality(shuffled, solution))

    def test_scaled_rhs(self):
        """Checks that scaling every rhs by q scales the optimum by q."""
        model = _commutator_model()
        expected = solve(model).objective_value
        identity = range(model.num_variables), range(model.num_constraints)
        for scale in (Fraction(2), Fraction(3, 7)):
            with self.subTest(scale=scale):
                solution = solve(_rebuilt(model, *identity, scale=scale))
                self.assertEqual(solution.objective_value, scale * expected)


if __name__ == "__main__":
    main()
