"""Module to sweep scl over the surgery family BS(d m, d l) for a range of d.
"""

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from io import StringIO
from logging import info, warning
from pathlib import Path
from time import perf_counter
from typing import Iterable, Optional

import numpy as np
from tabulate import tabulate

from code.bs_words import GroupParams, is_tight_as_written, parse_chain, raw_terms
from code.constants import SWEEP_WORKERS
from code.exceptions import InputError, ResourceLimitError
from code.formulas import match_formula
from code.helpers import format_fraction, timer
from code.solver_block import SolverOptions
from code.solver_pieces import scl


CSV_COLUMNS = ("d", "M", "L", "num", "den", "solver", "vars", "pivots", "millis")


@dataclass(frozen=True)
class SweepRow:
    d: int
    M: int
    L: int
    value: Optional[Fraction]
    solver: str = ""
    variables: int = 0
    pivots: int = 0
    millis: int = 0
    status: str = "ok"
    tight_without_reduction: bool = False
    bracket: Optional[tuple[Fraction, Fraction]] = None


@dataclass(frozen=True)
class SweepReport:
    """Exact scl values along a surgery family, sorted by d."""

    chain: str
    rows: tuple[SweepRow, ...]
    limit_hint: Optional[Fraction] = None
    notes: tuple[str, ...] = field(default=())

    def values(self) -> list[Optional[Fraction]]:
        return [row.value for row in self.rows]

    def gap(self, row: SweepRow) -> Optional[Fraction]:
        if self.limit_hint is None or row.value is None:
            return None
        return self.limit_hint - row.value

    @property
    def monotone(self) -> Optional[bool]:
        """Whether the solved values never decrease with d, None if fewer
        than two rows were solved."""
        values = [row.value for row in self.rows if row.value is not None]
        if len(values) < 2:
            return None
        steps = np.diff(np.array(values, dtype=object))
        return bool(all(step >= 0 for step in steps))

    def records(self) -> list[dict]:
        records = []
        for row in self.rows:
            record = {
                "d": row.d,
                "M": row.M,
                "L": row.L,
                "num": None if row.value is None else row.value.numerator,
                "den": None if row.value is None else row.value.denominator,
                "solver": row.solver,
                "vars": row.variables,
                "pivots": row.pivots,
                "millis": row.millis,
            }
            if self.limit_hint is not None:
                gap = self.gap(row)
                record["gap"] = None if gap is None else format_fraction(gap)
            records.append(record)
        return records

    def to_json(self) -> dict:
        rows = self.records()
        for record, row in zip(rows, self.rows):
            record["status"] = row.status
            record["tight_without_reduction"] = row.tight_without_reduction
            record["bracket"] = (
                None if row.bracket is None else [format_fraction(b) for b in row.bracket]
            )
        return {
            "chain": self.chain,
            "rows": rows,
            "limit_hint": None if self.limit_hint is None else format_fraction(self.limit_hint),
            "monotone": self.monotone,
            "notes": list(self.notes),
        }

    def csv_text(self) -> str:
        columns = list(CSV_COLUMNS) + (["gap"] if self.limit_hint is not None else [])
        buffer = StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.records())
        return buffer.getvalue()

    def write_csv(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as outfile:
            outfile.write(self.csv_text())

    def write_json(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as outfile:
            json.dump(self.to_json(), outfile, indent=2)
            outfile.write("\n")

    def table(self) -> str:
        headers = ["d", "M", "L", "scl", "solver", "vars", "pivots", "tight"]
        if self.limit_hint is not None:
            headers.append("gap")
        body = []
        for row in self.rows:
            line = [
                row.d,
                row.M,
                row.L,
                row.status if row.value is None else format_fraction(row.value),
                row.solver,
                row.variables,
                row.pivots,
                "yes" if row.tight_without_reduction else "no",
            ]
            if self.limit_hint is not None:
                gap = self.gap(row)
                line.append("" if gap is None else format_fraction(gap))
            body.append(line)
        return tabulate(body, headers=headers)


def substitute(template: str, d: int) -> str:
    """Replaces every `{d}` of a chain template by the value of d."""
    return template.replace("{d}", str(d))


def sweep_row(template: str, m: int, ell: int, d: int, options: SolverOptions) -> SweepRow:
    """Solves one member of the family; failures become row statuses."""
    params = GroupParams(d * m, d * ell)
    text = substitute(template, d)
    start = perf_counter()
    chain = parse_chain(text, params)
    tight = not chain.dropped_elliptic and all(
        is_tight_as_written(letters, params) for _, letters in raw_terms(text)
    )
    match = match_formula(chain, params)
    bracket = None
    if match is not None:
        formula = match[1]
        lower = formula.value if formula.validity == "exact" else formula.lower
        bracket = (lower, formula.value) if lower is not None else None
    try:
        result = scl(chain, params, options)
    except ResourceLimitError as err:
        warning("d = %d: %s", d, err)
        return SweepRow(d, params.M, params.L, None, status="resource_limit",
                        tight_without_reduction=tight, bracket=bracket)
    millis = int(1000 * (perf_counter() - start))
    status = "infinite" if result.infinite else result.status
    return SweepRow(
        d,
        params.M,
        params.L,
        result.value,
        result.solver,
        result.lp_stats.variables,
        result.lp_stats.pivots,
        millis,
        status,
        tight,
        bracket,
    )


@timer
def surgery_sweep(
    template: str,
    m: int,
    ell: int,
    d_values: Iterable[int],
    options: SolverOptions = SolverOptions(),
    workers: int = SWEEP_WORKERS,
    limit_hint: Optional[Fraction] = None,
) -> SweepReport:
    """Computes scl of the chain over BS(d m, d l) for every d.

    Parameters
    ----------
    template : str
        A chain, possibly containing the placeholder `{d}`.
    m, ell : int
        The reduced parameters of the family.
    d_values : Iterable[int]
        The values of d, all positive.
    options : SolverOptions
        Solver choice and ceilings for every row.
    workers : int
        Number of worker processes; rows are solved in this process when 1.
    limit_hint : Fraction, optional
        A known limit of the sequence, used for the gap column.

    Returns
    ----------
    SweepReport
        One row per d, sorted by d.
    """
    d_values = sorted(set(d_values))
    if not d_values or d_values[0] < 1:
        raise InputError(f"d must range over positive integers, got {d_values}")
    # the template must parse before any row is solved
    raw_terms(substitute(template, d_values[0]))
    info("Sweeping %s over d = %s", template, d_values)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_row, template, m, ell, d, options) for d in d_values]
            rows = [future.result() for future in futures]
    else:
        rows = [sweep_row(template, m, ell, d, options) for d in d_values]

    notes = []
    for row in rows:
        if row.bracket is not None and row.value is not None:
            lower, upper = row.bracket
            if not lower <= row.value <= upper:
                notes.append(f"d = {row.d}: {row.value} lies outside [{lower}, {upper}]")
    report = SweepReport(template, tuple(rows), limit_hint, tuple(notes))
    if report.monotone is False:
        info("Sweep values are not monotone in d")
    return report


def parse_d_range(text: str) -> list[int]:
    """Parses `2..6`, `1,3,5` or a single integer."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            low, high = part.split("..", 1)
            values.extend(range(int(low), int(high) + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise InputError(f"empty d range '{text}'")
    return values
