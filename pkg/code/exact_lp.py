"""Module to model and solve linear programs exactly over the rationals.

    Models are stated with nonnegative variables, sparse rows with relation
    "=", "<=" or ">=", and a sparse objective to maximize or minimize. The
    solver is a two-phase revised simplex method on Fractions that keeps the
    basis inverse as sparse rows. It prices with the largest reduced cost and
    falls back to Bland's rule during long runs of degenerate pivots, so it
    terminates on every model.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from logging import debug, info
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from code.constants import DEGENERATE_PIVOT_SWITCH, MAX_PIVOTS
from code.exceptions import ResourceLimitError
from code.helpers import Rational, format_fraction


RELATIONS = ("=", "<=", ">=")
SENSES = ("max", "min")

ZERO = Fraction(0)
ONE = Fraction(1)

SparseRow = Union[Mapping[int, Rational], Iterable[tuple[int, Rational]]]


# --------------------------------------------------------------------- #
#                                MODEL                                  #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class Constraint:
    """A sparse row sum_j a_j x_j (relation) rhs."""

    coefficients: tuple[tuple[int, Fraction], ...]
    relation: str
    rhs: Fraction
    name: str


def _sparse(row: SparseRow) -> dict[int, Fraction]:
    items = row.items() if isinstance(row, Mapping) else row
    result: dict[int, Fraction] = {}
    for index, value in items:
        result[index] = result.get(index, ZERO) + Fraction(value)
    return {index: value for index, value in result.items() if value != 0}


class LPModel:
    """An exact linear program over nonnegative variables."""

    def __init__(self, name: str = "lp", sense: str = "max"):
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}, got {sense}")
        self.name = name
        self.sense = sense
        self.variable_names: list[str] = []
        self._index: dict[str, int] = {}
        self.constraints: list[Constraint] = []
        self.objective: dict[int, Fraction] = {}

    @property
    def num_variables(self) -> int:
        return len(self.variable_names)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_variable(self, name: str) -> int:
        if name in self._index:
            raise ValueError(f"variable {name} already exists")
        self._index[name] = len(self.variable_names)
        self.variable_names.append(name)
        return self._index[name]

    def variable(self, name: str) -> int:
        """Index of a variable, created on first use."""
        if name not in self._index:
            return self.add_variable(name)
        return self._index[name]

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def add_constraint(
        self, coefficients: SparseRow, relation: str, rhs: Rational, name: Optional[str] = None
    ) -> int:
        """Appends a row and returns its index."""
        if relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}, got {relation}")
        row = _sparse(coefficients)
        for index in row:
            if not 0 <= index < self.num_variables:
                raise ValueError(f"row {name} refers to unknown variable {index}")
        constraint = Constraint(
            tuple(sorted(row.items())),
            relation,
            Fraction(rhs),
            name if name is not None else f"c{len(self.constraints)}",
        )
        self.constraints.append(constraint)
        return len(self.constraints) - 1

    def set_objective(self, coefficients: SparseRow, sense: Optional[str] = None):
        if sense is not None:
            if sense not in SENSES:
                raise ValueError(f"sense must be one of {SENSES}, got {sense}")
            self.sense = sense
        self.objective = _sparse(coefficients)

    def objective_at(self, values: Iterable[Rational]) -> Fraction:
        values = list(values)
        return sum((c * values[j] for j, c in self.objective.items()), ZERO)

    def named(self, values: Iterable[Rational]) -> dict[str, Fraction]:
        """Nonzero entries of a primal vector keyed by variable name."""
        return {
            self.variable_names[j]: Fraction(v) for j, v in enumerate(values) if v != 0
        }


@dataclass(frozen=True)
class LPSolution:
    """Outcome of a solve. Primal, dual and objective are only meaningful
    when the status is optimal."""

    status: str
    primal: tuple[Fraction, ...] = ()
    dual: tuple[Fraction, ...] = ()
    objective_value: Optional[Fraction] = None
    pivots: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


# --------------------------------------------------------------------- #
#                          REVISED SIMPLEX                              #
# --------------------------------------------------------------------- #
class _RevisedSimplex:
    """Private solver state for one solve of one model."""

    def __init__(self, model: LPModel, max_pivots: int):
        self.model = model
        self.max_pivots = max_pivots
        self.pivots = 0
        m = model.num_constraints
        self.m = m
        self.columns: list[dict[int, Fraction]] = [{} for _ in range(model.num_variables)]
        self.flip: list[int] = []
        self.b: list[Fraction] = []
        for i, row in enumerate(model.constraints):
            sign = -1 if row.rhs < 0 else 1
            self.flip.append(sign)
            self.b.append(sign * row.rhs)
            for j, value in row.coefficients:
                self.columns[j][i] = sign * value

        self.basis: list[int] = [-1] * m
        for i, row in enumerate(model.constraints):
            if row.relation == "=":
                continue
            coefficient = self.flip[i] * (1 if row.relation == "<=" else -1)
            self.columns.append({i: Fraction(coefficient)})
            if coefficient == 1:
                self.basis[i] = len(self.columns) - 1
        self.first_artificial = len(self.columns)
        for i in range(m):
            if self.basis[i] < 0:
                self.columns.append({i: ONE})
                self.basis[i] = len(self.columns) - 1

        self.binv: list[dict[int, Fraction]] = [{i: ONE} for i in range(m)]
        self.xb: list[Fraction] = list(self.b)
        self.position = {col: i for i, col in enumerate(self.basis)}

    def _is_artificial(self, j: int) -> bool:
        return j >= self.first_artificial

    def _duals(self, cost: list[Fraction]) -> dict[int, Fraction]:
        y: dict[int, Fraction] = {}
        for i, col in enumerate(self.basis):
            cb = cost[col]
            if cb:
                for k, value in self.binv[i].items():
                    y[k] = y.get(k, ZERO) + cb * value
        return y

    def _reduced_cost(self, j: int, cost: list[Fraction], y: dict[int, Fraction]) -> Fraction:
        return cost[j] - sum((y.get(r, ZERO) * a for r, a in self.columns[j].items()), ZERO)

    def _column(self, j: int) -> list[Fraction]:
        column = self.columns[j]
        u = []
        for row in self.binv:
            total = ZERO
            for r, a in column.items():
                value = row.get(r)
                if value is not None:
                    total += value * a
            u.append(total)
        return u

    def _pivot(self, r: int, j: int, u: list[Fraction]):
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise ResourceLimitError("simplex pivots", self.pivots, self.max_pivots)
        pivot = u[r]
        pivot_row = {k: v / pivot for k, v in self.binv[r].items()}
        theta = self.xb[r] / pivot
        self.binv[r] = pivot_row
        self.xb[r] = theta
        for i, factor in enumerate(u):
            if i == r or factor == 0:
                continue
            row = self.binv[i]
            for k, v in pivot_row.items():
                value = row.get(k, ZERO) - factor * v
                if value:
                    row[k] = value
                else:
                    row.pop(k, None)
            self.xb[i] -= factor * theta
        del self.position[self.basis[r]]
        self.basis[r] = j
        self.position[j] = r

    def _optimize(self, cost: list[Fraction], allow_artificial: bool) -> str:
        bland = False
        degenerate_run = 0
        while True:
            y = self._duals(cost)
            entering, best = -1, ZERO
            for j in range(len(self.columns)):
                if j in self.position or (not allow_artificial and self._is_artificial(j)):
                    continue
                reduced = self._reduced_cost(j, cost, y)
                if reduced > best:
                    entering, best = j, reduced
                    if bland:
                        break
            if entering < 0:
                return "optimal"
            u = self._column(entering)
            leaving, ratio = -1, None
            for i, value in enumerate(u):
                if value > 0:
                    candidate = self.xb[i] / value
                    if (
                        ratio is None
                        or candidate < ratio
                        or (candidate == ratio and self.basis[i] < self.basis[leaving])
                    ):
                        leaving, ratio = i, candidate
            if leaving < 0:
                return "unbounded"
            self._pivot(leaving, entering, u)
            if ratio == 0:
                degenerate_run += 1
                if degenerate_run >= DEGENERATE_PIVOT_SWITCH and not bland:
                    debug("Switching to Bland's rule after %d degenerate pivots", degenerate_run)
                    bland = True
            else:
                degenerate_run = 0
                bland = False

    def _drive_out_artificials(self):
        for i in range(self.m):
            if not self._is_artificial(self.basis[i]):
                continue
            row = self.binv[i]
            for j in range(self.first_artificial):
                if j in self.position:
                    continue
                entry = sum((row.get(r, ZERO) * a for r, a in self.columns[j].items()), ZERO)
                if entry != 0:
                    self._pivot(i, j, self._column(j))
                    break

    def solve(self) -> LPSolution:
        n_columns = len(self.columns)
        phase_one = [ZERO] * n_columns
        for j in range(self.first_artificial, n_columns):
            phase_one[j] = -ONE
        self._optimize(phase_one, allow_artificial=True)
        infeasibility = sum(
            (self.xb[i] for i, col in enumerate(self.basis) if self._is_artificial(col)), ZERO
        )
        if infeasibility > 0:
            return LPSolution("infeasible", pivots=self.pivots)
        self._drive_out_artificials()

        direction = 1 if self.model.sense == "max" else -1
        phase_two = [ZERO] * n_columns
        for j, value in self.model.objective.items():
            phase_two[j] = direction * value
        if self._optimize(phase_two, allow_artificial=False) == "unbounded":
            return LPSolution("unbounded", pivots=self.pivots)

        primal = [ZERO] * self.model.num_variables
        for i, col in enumerate(self.basis):
            if col < self.model.num_variables:
                primal[col] = self.xb[i]
        y = self._duals(phase_two)
        dual = tuple(direction * self.flip[i] * y.get(i, ZERO) for i in range(self.m))
        return LPSolution(
            "optimal",
            tuple(primal),
            dual,
            self.model.objective_at(primal),
            self.pivots,
        )


def solve(model: LPModel, max_pivots: int = MAX_PIVOTS) -> LPSolution:
    """Solves a model exactly.

    Parameters
    ----------
    model : LPModel
        The model, left untouched.
    max_pivots : int
        Ceiling on the number of simplex pivots over both phases.

    Returns
    ----------
    LPSolution
        Optimal solutions carry the primal vector, one dual multiplier per
        row and the objective value. Infeasible and unbounded models are
        statuses, not errors.
    """
    info(
        "Solving %s: %d variables, %d constraints",
        model.name,
        model.num_variables,
        model.num_constraints,
    )
    solution = _RevisedSimplex(model, max_pivots).solve()
    info("Solved %s: %s after %d pivots", model.name, solution.status, solution.pivots)
    return solution


# --------------------------------------------------------------------- #
#                         CERTIFICATE CHECKING                          #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class OptimalityReport:
    """Result of an independent optimality check; truthy when it passed."""

    ok: bool
    violations: tuple[str, ...] = field(default=())

    def __bool__(self):
        return self.ok


def verify_optimality(model: LPModel, solution: LPSolution) -> OptimalityReport:
    """Re-checks a claimed optimum with exact arithmetic.

    Checks primal feasibility, the sign of every dual multiplier, dual
    feasibility of every column, complementary slackness and equality of the
    primal and dual objectives. For a max model the dual reads
    min b^T y, A^T y >= c, y >= 0 on "<=" rows and y <= 0 on ">=" rows; a min
    model flips every inequality.

    Parameters
    ----------
    model : LPModel
        The model that was solved.
    solution : LPSolution
        The claimed optimal solution.

    Returns
    ----------
    OptimalityReport
        ok, plus a description of every violated condition.
    """
    violations: list[str] = []
    if not solution.is_optimal:
        return OptimalityReport(False, (f"status is {solution.status}",))
    x, y = solution.primal, solution.dual
    if len(x) != model.num_variables or len(y) != model.num_constraints:
        return OptimalityReport(False, ("vector sizes do not match the model",))
    direction = 1 if model.sense == "max" else -1

    for j, value in enumerate(x):
        if value < 0:
            violations.append(f"variable {model.variable_names[j]} is negative: {value}")

    for i, row in enumerate(model.constraints):
        lhs = sum((a * x[j] for j, a in row.coefficients), ZERO)
        slack = row.rhs - lhs
        if (
            (row.relation == "=" and slack != 0)
            or (row.relation == "<=" and slack < 0)
            or (row.relation == ">=" and slack > 0)
        ):
            violations.append(
                f"row {row.name} violated: {format_fraction(lhs)} {row.relation} "
                f"{format_fraction(row.rhs)}"
            )
        signed = direction * y[i]
        if (row.relation == "<=" and signed < 0) or (row.relation == ">=" and signed > 0):
            violations.append(f"dual of row {row.name} has the wrong sign: {y[i]}")
        if slack != 0 and y[i] != 0:
            violations.append(f"row {row.name} is slack but carries dual {y[i]}")

    column_sums = [ZERO] * model.num_variables
    for i, row in enumerate(model.constraints):
        if y[i]:
            for j, a in row.coefficients:
                column_sums[j] += a * y[i]
    for j in range(model.num_variables):
        reduced = model.objective.get(j, ZERO) - column_sums[j]
        if direction * reduced > 0:
            violations.append(
                f"column {model.variable_names[j]} has an improving reduced cost {reduced}"
            )
        if x[j] != 0 and reduced != 0:
            violations.append(
                f"column {model.variable_names[j]} is positive with reduced cost {reduced}"
            )

    primal_value = model.objective_at(x)
    dual_value = sum((row.rhs * y[i] for i, row in enumerate(model.constraints)), ZERO)
    if primal_value != dual_value:
        violations.append(f"duality gap: primal {primal_value} != dual {dual_value}")
    if solution.objective_value != primal_value:
        violations.append(
            f"reported objective {solution.objective_value} != computed {primal_value}"
        )
    return OptimalityReport(not violations, tuple(violations))


# --------------------------------------------------------------------- #
#                              TEXT DUMP                                #
# --------------------------------------------------------------------- #
def _format_row(coefficients: Iterable[tuple[int, Fraction]], names: list[str]) -> str:
    terms = []
    for j, value in coefficients:
        sign = "-" if value < 0 else "+"
        terms.append(f"{sign} {format_fraction(abs(value))} {names[j]}")
    text = " ".join(terms) or "0"
    return text[2:] if text.startswith("+ ") else text


def dumps_model(model: LPModel) -> str:
    """Renders a model in plain text, one constraint per line:

        # lp <name>: <variables> variables, <constraints> constraints
        max: 1/2 x + 1 y
        <row name>: 1 x - 1 y <= 3/4
        var <index> <name>
    """
    names = model.variable_names
    lines = [
        f"# lp {model.name}: {model.num_variables} variables, "
        f"{model.num_constraints} constraints",
        f"{model.sense}: {_format_row(sorted(model.objective.items()), names)}",
    ]
    for row in model.constraints:
        lines.append(
            f"{row.name}: {_format_row(row.coefficients, names)} {row.relation} "
            f"{format_fraction(row.rhs)}"
        )
    lines.extend(f"var {j} {name}" for j, name in enumerate(names))
    return "\n".join(lines) + "\n"


def dump_model(model: LPModel, path: Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")
