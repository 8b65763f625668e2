"""Module to handle validity testing for the surgery family sweeps."""

from fractions import Fraction
from os import getenv
from unittest import TestCase, main, skipUnless

from code.sweep import CSV_COLUMNS, parse_d_range, substitute, surgery_sweep


SLOW_TESTS = getenv("BS_SCL_SLOW_TESTS") == "1"


class TestSweepInput(TestCase):
    """Test cases for d ranges and chain templates."""

    def test_d_ranges(self):
        """Checks ranges, lists and single values."""
        self.assertEqual(parse_d_range("2..4"), [2, 3, 4])
        self.assertEqual(parse_d_range("1, 3,5"), [1, 3, 5])
        self.assertEqual(parse_d_range("4"), [4])
        with self.assertRaises(ValueError):
            parse_d_range(" , ")

    def test_substitute(self):
        """Checks that every placeholder is replaced."""
        self.assertEqual(substitute("a^{d} t^2 + {d} T", 3), "a^3 t^2 + 3 T")
        self.assertEqual(substitute("atAT", 5), "atAT")

    def test_nonpositive_d(self):
        """Checks that d = 0 is refused."""
        with self.assertRaises(ValueError):
            surgery_sweep("atAT", 2, 3, [0, 1])


class TestSurgerySweep(TestCase):
    """Test cases for a sweep over BS(2d, 3d)."""

    @classmethod
    def setUpClass(cls):
        cls.report = surgery_sweep("atAT", 2, 3, [2, 1], limit_hint=Fraction(1, 2))

    def test_values(self):
        """Checks scl(atAT) = 1/12 in BS(2,3) and 7/24 in BS(4,6)."""
        self.assertEqual([row.d for row in self.report.rows], [1, 2])
        self.assertEqual([(row.M, row.L) for row in self.report.rows], [(2, 3), (4, 6)])
        self.assertEqual(self.report.values(), [Fraction(1, 12), Fraction(7, 24)])
        self.assertTrue(self.report.monotone)
        self.assertEqual(self.report.notes, ())

    def test_gap(self):
        """Checks the distance to the given limit."""
        self.assertEqual(self.report.gap(self.report.rows[0]), Fraction(5, 12))
        self.assertEqual(self.report.gap(self.report.rows[1]), Fraction(5, 24))

    def test_csv(self):
        """Checks the header and the exact columns of the CSV report."""
        lines = self.report.csv_text().splitlines()
        self.assertEqual(lines[0], ",".join(CSV_COLUMNS) + ",gap")
        self.assertTrue(lines[1].startswith("1,2,3,1,12,"))
        self.assertTrue(lines[2].startswith("2,4,6,7,24,"))
        self.assertTrue(lines[1].endswith(",5/12"))

    def test_json_and_table(self):
        """Checks the JSON report and the table layout."""
        data = self.report.to_json()
        self.assertEqual(data["limit_hint"], "1/2")
        self.assertEqual(data["rows"][1]["num"], 7)
        self.assertEqual(data["rows"][1]["status"], "ok")
        self.assertTrue(data["monotone"])
        self.assertIn("7/24", self.report.table())

    def test_obstructed_rows(self):
        """Checks that nonzero t-homology is reported row by row."""
        report = surgery_sweep("a t", 2, 3, [1, 2])
        self.assertEqual([row.status for row in report.rows], ["infinite", "infinite"])
        self.assertEqual(report.values(), [None, None])
        self.assertIsNone(report.monotone)
        self.assertEqual(report.records()[0]["num"], None)

    def test_eg2_first_member(self):
        """Checks 1/2 - 5/48 for a t^2 A t^-1 + t^-1 in BS(4,6)."""
        report = surgery_sweep("a t^2 A T + T", 2, 3, [2])
        self.assertEqual(report.values(), [Fraction(19, 48)])
        self.assertEqual(report.rows[0].status, "ok")

    @skipUnless(SLOW_TESTS, "set BS_SCL_SLOW_TESTS=1 to run")
    def test_eg2_family(self):
        """Checks 1/2 - 5/(24d) over BS(2d, 3d) for d = 2..6."""
        report = surgery_sweep("a t^2 A T + T", 2, 3, range(2, 7), limit_hint=Fraction(1, 2))
        expected = [Fraction(1, 2) - Fraction(5, 24 * d) for d in range(2, 7)]
        self.assertEqual(report.values(), expected)
        self.assertTrue(report.monotone)
        self.assertEqual(report.notes, ())


if __name__ == "__main__":
    main()
