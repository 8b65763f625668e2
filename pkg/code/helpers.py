"""Helper functions for the project.
"""

from fractions import Fraction
from functools import wraps
from logging import basicConfig, info
from math import lcm
from time import perf_counter
from typing import Iterable, Union

import numpy as np

from code.constants import LOG_LEVEL


basicConfig(level=LOG_LEVEL)

Rational = Union[int, Fraction]


def timer(func):
    """Decorator to measure the execution time of a function."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        start = perf_counter()
        result = func(*args, **kwargs)
        end = perf_counter()
        info("Execution time of %s: %.2f seconds.", func.__name__, end - start)
        return result

    return wrapper


def positive_representative(value: int, modulus: int) -> int:
    """Returns the unique number congruent to value in {1, ..., modulus}.

    Parameters
    ----------
    value : int
        Any integer.
    modulus : int
        A positive modulus.

    Returns
    ----------
    int
        The representative, equal to modulus when value is divisible by it.
    """
    rep = value % modulus
    return rep if rep else modulus


def lcm_of(values: Iterable[int]) -> int:
    """Least common multiple of a nonempty collection of positive integers,
    computed on Python integers so that it never wraps around."""
    values = [int(value) for value in values]
    if not values:
        raise ValueError("lcm of an empty collection is undefined")
    return lcm(*values)


def common_denominator(values: Iterable[Rational]) -> int:
    """Least positive integer n such that n * v is integral for every v."""
    denominators = [Fraction(v).denominator for v in values]
    return lcm_of(denominators) if denominators else 1


def parse_fraction(text: str) -> Fraction:
    """Parses an exact rational written as `p`, `p/q` or a finite decimal.

    Parameters
    ----------
    text : str
        The rational to parse.

    Returns
    ----------
    Fraction
        The exact value.
    """
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as err:
        raise ValueError(f"'{text}' is not an exact rational number") from err


def fraction_to_json(value: Fraction) -> dict:
    """Encodes a rational as {"num": p, "den": q} with q > 0."""
    value = Fraction(value)
    return {"num": value.numerator, "den": value.denominator}


def format_fraction(value: Rational) -> str:
    """Prints a rational as `p/q`, or `p` when it is an integer."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def random_raw_word(rng: np.random.Generator, length: int, max_exponent: int = 6) -> str:
    """Draws a random word over a, t and their inverses in the chain grammar.

    Parameters
    ----------
    rng : np.random.Generator
        Source of randomness.
    length : int
        Number of letters to draw.
    max_exponent : int
        Largest absolute a-exponent of a single letter.

    Returns
    ----------
    str
        The word, e.g. `a^3 t a^-2 T`.
    """
    letters = []
    for _ in range(length):
        if rng.integers(0, 2):
            letters.append("t" if rng.integers(0, 2) else "T")
        else:
            exponent = int(rng.integers(-max_exponent, max_exponent + 1))
            letters.append(f"a^{exponent}")
    return " ".join(letters) or "a^0"
