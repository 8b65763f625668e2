"""Module to evaluate the closed-form scl values of a few chain families and
    to build the turn cost tables that certify them.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Optional

from code.bs_words import Chain, GroupParams, canonical_key, parse_chain
from code.exceptions import InputError
from code.solver_block import CostRule, CostTable


# --------------------------------------------------------------------- #
#                              CHAINS                                   #
# --------------------------------------------------------------------- #
EG1_TEMPLATE = "a^{k} t^2 + 2 T"
EG2_CHAIN = "a t^2 A T + T"
EG3_CHAIN = "a t^2 A t^-2"
TALT_PRODUCT_CHAIN = "atAT"
TALT_COMMUTATOR_CHAIN = "ataTAtAT"

FORMULA_NAMES = ("eg1", "eg2", "talt_product", "talt_commutator")


@dataclass(frozen=True)
class FormulaResult:
    """A closed-form value, with the conditions under which it is exact.

    validity is "exact", "upper_bound" or "conditional"; in the last case
    the true value lies in [lower, value].
    """

    value: Fraction
    validity: str = "exact"
    lower: Optional[Fraction] = None
    condition: str = ""

    def contains(self, value: Fraction) -> bool:
        if self.validity == "exact":
            return value == self.value
        if self.validity == "upper_bound":
            return value <= self.value
        return self.lower <= value <= self.value

    def __str__(self):
        if self.validity == "exact":
            detail = f"exact; {self.condition}" if self.condition else "exact"
            return f"{self.value} ({detail})"
        if self.validity == "upper_bound":
            return f"<= {self.value} ({self.condition})"
        return f"[{self.lower}, {self.value}] (conditional; {self.condition})"


def _require_nonsolvable(params: GroupParams):
    if params.is_solvable:
        raise InputError(f"the formula needs |M|, |L| >= 2, got {params}")


# --------------------------------------------------------------------- #
#                             FORMULAS                                  #
# --------------------------------------------------------------------- #
def eg1_chain(params: GroupParams, k: int) -> Chain:
    return parse_chain(EG1_TEMPLATE.format(k=k), params)


def eg1_formula(params: GroupParams, k: int) -> FormulaResult:
    """scl(a^k t^2 + 2 t^-1) = 1/2 - gcd(|k|, d) / (2d)."""
    d = params.d
    return FormulaResult(Fraction(1, 2) - Fraction(gcd(k, d), 2 * d))


def talt_product_formula(params: GroupParams) -> FormulaResult:
    """scl(atAT) = (1 - 1/|M| - 1/|L|) / 2."""
    _require_nonsolvable(params)
    return FormulaResult(
        (1 - Fraction(1, abs(params.M)) - Fraction(1, abs(params.L))) / 2
    )


def talt_commutator_formula(params: GroupParams) -> FormulaResult:
    """scl(ataTAtAT) = 1/2 - 1/min(|M|, |L|)."""
    _require_nonsolvable(params)
    return FormulaResult(Fraction(1, 2) - Fraction(1, min(abs(params.M), abs(params.L))))


def eg2_formula(params: GroupParams) -> FormulaResult:
    """Value of scl(a t^2 A t^-1 + t^-1).

    The upper bound 1/2 - 1/(4|M|) - 1/(4|L|) is exact once
    d >= (|M| + |L|) / (2 min(|M|, |L|)); below that threshold the value is
    only known to be at least 1/2 - 1/(2 min(|M|, |L|)).

    Parameters
    ----------
    params : GroupParams
        The group, with |M|, |L| >= 2.

    Returns
    ----------
    FormulaResult
        Exact value, or the bracket with validity "conditional".
    """
    _require_nonsolvable(params)
    M, L = abs(params.M), abs(params.L)
    upper = Fraction(1, 2) - Fraction(1, 4 * M) - Fraction(1, 4 * L)
    threshold = Fraction(M + L, 2 * min(M, L))
    if params.d >= threshold:
        return FormulaResult(upper, "exact", condition=f"condition d>={threshold} holds")
    lower = Fraction(1, 2) - Fraction(1, 2 * min(M, L))
    return FormulaResult(
        upper, "conditional", lower, f"condition d>={threshold} fails for d={params.d}"
    )


def evaluate_formula(name: str, params: GroupParams, k: Optional[int] = None) -> FormulaResult:
    if name == "eg1":
        if k is None:
            raise InputError("eg1 needs the exponent k")
        return eg1_formula(params, k)
    if name == "eg2":
        return eg2_formula(params)
    if name == "talt_product":
        return talt_product_formula(params)
    if name == "talt_commutator":
        return talt_commutator_formula(params)
    raise InputError(f"unknown formula '{name}', expected one of {FORMULA_NAMES}")


def _chain_signature(chain: Chain) -> frozenset:
    return frozenset((coef, canonical_key(word)) for coef, word in chain.terms)


def match_formula(chain: Chain, params: GroupParams) -> Optional[tuple[str, FormulaResult]]:
    """Finds the closed form that applies to a chain, if any."""
    signature = _chain_signature(chain)
    candidates = [
        ("eg2", EG2_CHAIN, eg2_formula),
        ("talt_product", TALT_PRODUCT_CHAIN, talt_product_formula),
        ("talt_commutator", TALT_COMMUTATOR_CHAIN, talt_commutator_formula),
    ]
    if not params.is_solvable:
        for name, text, formula in candidates:
            if _chain_signature(parse_chain(text, params)) == signature:
                return name, formula(params)
    for _, word in chain.terms:
        if tuple(eps for _, eps in word.syllables) == (1, 1):
            k = sum(p for p, _ in word.syllables)
            if _chain_signature(eg1_chain(params, k)) == signature:
                return "eg1", eg1_formula(params, k)
    return None


# --------------------------------------------------------------------- #
#                            COST TABLES                                #
# --------------------------------------------------------------------- #
def _rule(src: int, dst: int, cost: Fraction, classes="all") -> CostRule:
    return CostRule(src, dst, classes, Fraction(cost))


def eg2_cost_table(params: GroupParams) -> CostTable:
    """Turn costs on the arcs a1..a4 of a t^2 A t^-1 + t^-1 giving the lower
    bound 1/2 - 1/(4|M|) - 1/(4|L|)."""
    inv_m, inv_l = Fraction(1, abs(params.M)), Fraction(1, abs(params.L))
    half = (inv_m + inv_l) / 2
    return CostTable(
        (
            _rule(1, 1, inv_m),
            _rule(1, 4, 1 - inv_m - inv_l),
            _rule(2, 1, inv_m),
            _rule(2, 4, 1 - half),
            _rule(3, 2, inv_l),
            _rule(3, 3, inv_l),
            _rule(4, 2, half),
            _rule(4, 3, 0),
        ),
        name=f"eg2 {params}",
    )


def eg2_uniform_cost_table(params: GroupParams) -> CostTable:
    """Turn costs giving scl >= 1/2 - 1/(2 min(|M|, |L|)) for every d."""
    inv_min = Fraction(1, min(abs(params.M), abs(params.L)))
    return CostTable(
        (
            _rule(1, 1, inv_min),
            _rule(1, 4, 0),
            _rule(2, 1, 0),
            _rule(2, 4, 0),
            _rule(3, 2, 0),
            _rule(3, 3, inv_min),
            _rule(4, 2, 1),
            _rule(4, 3, 1),
        ),
        name=f"eg2 uniform {params}",
    )


def eg3_cost_table() -> CostTable:
    """Turn costs on the arcs a1..a4 of [a, t^2] in BS(2,3), where the class
    parity of turns between the same arcs matters."""
    return CostTable(
        (
            _rule(1, 1, Fraction(1, 4), "even"),
            _rule(1, 1, Fraction(3, 4), "odd"),
            _rule(4, 2, Fraction(1), "even"),
            _rule(4, 2, Fraction(1, 2), "odd"),
            _rule(2, 4, 0),
            _rule(3, 3, Fraction(1, 3)),
            _rule(2, 1, Fraction(1, 3)),
            _rule(4, 3, 0),
            _rule(1, 4, Fraction(1, 4)),
            _rule(3, 2, Fraction(1)),
        ),
        name="eg3 BS(2,3)",
    )


def builtin_cost_table(name: str, params: GroupParams) -> CostTable:
    if name == "eg2":
        return eg2_cost_table(params)
    if name == "eg2_uniform":
        return eg2_uniform_cost_table(params)
    if name == "eg3":
        return eg3_cost_table()
    raise InputError(f"unknown cost table '{name}'")
