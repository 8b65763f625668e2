"""Module to parse chains and reduce words in the Baumslag-Solitar group
    BS(M, L) = < a, t | a^M = t a^L t^-1 >.

    Words are stored as tuples of syllables (p, eps) standing for a^p t^eps,
    read cyclically. Every stored word is tight, meaning that no cyclic
    subword t a^{kL} t^-1 or t^-1 a^{kM} t remains.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from logging import debug
from math import gcd
from typing import Sequence, Union

from code.exceptions import ChainSyntaxError, UndefinedInvariantError


Syllable = tuple[int, int]
Letter = tuple[str, int]

WORD_LETTERS = "aAtT"


# --------------------------------------------------------------------- #
#                              DATA TYPES                               #
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class GroupParams:
    """The pair (M, L) defining BS(M, L), with d = gcd(|M|, |L|), M = d m and
    L = d ell."""

    M: int
    L: int

    def __post_init__(self):
        if self.M == 0 or self.L == 0:
            raise ValueError(f"BS({self.M},{self.L}) needs nonzero M and L")

    @property
    def d(self) -> int:
        return gcd(abs(self.M), abs(self.L))

    @property
    def m(self) -> int:
        return self.M // self.d

    @property
    def ell(self) -> int:
        return self.L // self.d

    @property
    def is_solvable(self) -> bool:
        """BS(M, L) is solvable, and scl vanishes, when |M| = 1 or |L| = 1."""
        return abs(self.M) == 1 or abs(self.L) == 1

    def __str__(self):
        return f"BS({self.M},{self.L})"


@dataclass(frozen=True)
class TightWord:
    """A hyperbolic word a^{p_1} t^{eps_1} ... a^{p_n} t^{eps_n} with no
    Britton pinch, read cyclically."""

    syllables: tuple[Syllable, ...]

    @property
    def n(self) -> int:
        return len(self.syllables)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(eps for _, eps in self.syllables)

    def __str__(self):
        return word_to_string(self)


@dataclass(frozen=True)
class Elliptic:
    """A word conjugate into the vertex group, i.e. a power of a."""

    power: int

    def __str__(self):
        return _a_power(self.power) or "1"


@dataclass(frozen=True)
class Chain:
    """A rational chain sum r_i g_i with positive coefficients and pairwise
    distinct tight words."""

    terms: tuple[tuple[Fraction, TightWord], ...]
    dropped_elliptic: tuple[str, ...] = field(default=(), compare=False)

    @property
    def words(self) -> tuple[TightWord, ...]:
        return tuple(word for _, word in self.terms)

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return tuple(coef for coef, _ in self.terms)

    def __len__(self):
        return len(self.terms)

    def __str__(self):
        return chain_to_string(self)


@dataclass(frozen=True)
class Arc:
    """A maximal a-power segment of a tight loop, between two t-letters."""

    loop_index: int
    pos: int
    winding: int
    eps_out: int
    eps_in: int
    mu: int
    lam: int


# --------------------------------------------------------------------- #
#                                PARSING                                #
# --------------------------------------------------------------------- #
class _ChainScanner:
    """Single pass scanner for the chain grammar:
        chain  := term ('+' term)*
        term   := [rational] word
        word   := letter+
        letter := ('a' | 'A' | 't' | 'T') ['^' signed integer]
    Whitespace is ignored everywhere.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_whitespace(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_whitespace()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _read_while(self, allowed: str) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in allowed:
            self.pos += 1
        return self.text[start : self.pos]

    def parse_chain(self) -> list[tuple[Fraction, list[Letter], int]]:
        if not self.text.strip():
            raise ChainSyntaxError("empty chain", 0)
        terms = [self._parse_term()]
        while self._peek() == "+":
            self.pos += 1
            terms.append(self._parse_term())
        if self._peek():
            raise ChainSyntaxError(f"unexpected character '{self._peek()}'", self.pos)
        return terms

    def _parse_term(self) -> tuple[Fraction, list[Letter], int]:
        start = self.pos
        head = self._peek()
        coefficient = Fraction(1)
        if head == "-":
            raise ChainSyntaxError("nonpositive coefficient", self.pos)
        if head.isdigit() or head == ".":
            coefficient = self._parse_coefficient()
        letters = self._parse_word()
        if not letters:
            raise ChainSyntaxError("expected a word", self.pos)
        return coefficient, letters, start

    def _parse_coefficient(self) -> Fraction:
        start = self.pos
        token = self._read_while("0123456789.")
        if self._peek() == "/":
            self.pos += 1
            self._skip_whitespace()
            denominator = self._read_while("0123456789")
            if not denominator:
                raise ChainSyntaxError("expected a denominator", self.pos)
            token = f"{token}/{denominator}"
        try:
            value = Fraction(token)
        except (ValueError, ZeroDivisionError) as err:
            raise ChainSyntaxError(f"malformed coefficient '{token}'", start) from err
        if value <= 0:
            raise ChainSyntaxError("nonpositive coefficient", start)
        return value

    def _parse_word(self) -> list[Letter]:
        letters = []
        while self._peek() and self._peek() in WORD_LETTERS:
            letter = self.text[self.pos]
            self.pos += 1
            exponent = 1
            if self._peek() == "^":
                self.pos += 1
                exponent = self._parse_exponent()
            if letter.isupper():
                exponent = -exponent
            letters.append((letter.lower(), exponent))
        return letters

    def _parse_exponent(self) -> int:
        self._skip_whitespace()
        start = self.pos
        signum = self._read_while("+-")
        digits = self._read_while("0123456789")
        if not digits or len(signum) > 1:
            raise ChainSyntaxError("expected a signed integer exponent", start)
        return -int(digits) if signum == "-" else int(digits)


def parse_word(text: str) -> list[Letter]:
    """Parses a single word into letters (generator, exponent)."""
    scanner = _ChainScanner(text)
    letters = scanner._parse_word()
    if scanner._peek():
        raise ChainSyntaxError(f"unexpected character '{scanner._peek()}'", scanner.pos)
    return letters


def parse_chain(text: str, params: GroupParams) -> "Chain":
    """Parses a chain string and reduces every summand to tight form.

    Elliptic summands are dropped and recorded, duplicate words (up to cyclic
    rotation) are merged by summing their coefficients.

    Parameters
    ----------
    text : str
        The chain, e.g. `1/2 atAT + 1/2 at^2At^-2`.
    params : GroupParams
        The group the words live in.

    Returns
    ----------
    Chain
        The parsed chain.
    """
    merged: dict[tuple[Syllable, ...], list] = {}
    dropped = []
    for coefficient, letters, _ in _ChainScanner(text).parse_chain():
        reduced = britton_cyclic_reduce(letters, params)
        if isinstance(reduced, Elliptic):
            dropped.append(str(reduced))
            continue
        key = canonical_key(reduced)
        if key in merged:
            merged[key][0] += coefficient
        else:
            merged[key] = [coefficient, reduced]
    if dropped:
        debug("Dropped elliptic summands %s", dropped)
    terms = tuple((coef, word) for coef, word in merged.values())
    return Chain(terms, tuple(dropped))


# --------------------------------------------------------------------- #
#                           BRITTON REDUCTION                           #
# --------------------------------------------------------------------- #
def _to_syllables(letters: Sequence[Letter]) -> tuple[list[Syllable], int]:
    syllables = []
    pending = 0
    for generator, exponent in letters:
        if generator == "a":
            pending += exponent
            continue
        step = 1 if exponent > 0 else -1
        for _ in range(abs(exponent)):
            syllables.append((pending, step))
            pending = 0
    return syllables, pending


def _find_pinch(syllables: list[Syllable], params: GroupParams) -> Union[tuple[int, int], None]:
    n = len(syllables)
    for i in range(n):
        eps, (p_next, eps_next) = syllables[i][1], syllables[(i + 1) % n]
        if eps != -eps_next:
            continue
        if eps == 1 and p_next % params.L == 0:
            return i, p_next // params.L * params.M
        if eps == -1 and p_next % params.M == 0:
            return i, p_next // params.M * params.L
    return None


def britton_cyclic_reduce(
    word: Union[str, Sequence[Letter]], params: GroupParams
) -> Union[TightWord, Elliptic]:
    """Cyclically reduces a word by the pinch rules t a^{kL} t^-1 -> a^{kM} and
    t^-1 a^{kM} t -> a^{kL} until no pinch is left.

    Parameters
    ----------
    word : str | Sequence[tuple[str, int]]
        A word in the chain grammar, or its letters.
    params : GroupParams
        The group.

    Returns
    ----------
    TightWord | Elliptic
        The tight form, or the power of a the word is conjugate to.
    """
    letters = parse_word(word) if isinstance(word, str) else word
    syllables, tail = _to_syllables(letters)
    if not syllables:
        return Elliptic(tail)
    p_first, eps_first = syllables[0]
    syllables[0] = (p_first + tail, eps_first)
    while (pinch := _find_pinch(syllables, params)) is not None:
        i, converted = pinch
        if len(syllables) == 2:
            return Elliptic(syllables[i][0] + converted)
        rotated = syllables[i:] + syllables[:i]
        syllables = [(rotated[0][0] + converted + rotated[2][0], rotated[2][1])]
        syllables.extend(rotated[3:])
    return TightWord(tuple(syllables))


def raw_terms(text: str) -> list[tuple[Fraction, list[Letter]]]:
    """Parses a chain into (coefficient, letters) without reducing anything."""
    return [(coefficient, letters) for coefficient, letters, _ in _ChainScanner(text).parse_chain()]


def is_tight_as_written(letters: Sequence[Letter], params: GroupParams) -> bool:
    """Whether a word is hyperbolic and has no pinch before any reduction."""
    syllables, tail = _to_syllables(letters)
    if not syllables:
        return False
    syllables[0] = (syllables[0][0] + tail, syllables[0][1])
    return _find_pinch(syllables, params) is None


def canonical_key(word: TightWord) -> tuple[Syllable, ...]:
    """The lexicographically smallest cyclic rotation of the syllables."""
    syllables = word.syllables
    return min(syllables[i:] + syllables[:i] for i in range(len(syllables)))


def rotate_word(word: TightWord, shift: int) -> TightWord:
    """Cyclic rotation by shift syllables to the left."""
    shift %= word.n
    return TightWord(word.syllables[shift:] + word.syllables[:shift])


def inverse_word(word: TightWord) -> TightWord:
    """The tight word of g^-1, with syllable i = (-p_{-i}, -eps_{-i-1})."""
    n = word.n
    syllables = word.syllables
    return TightWord(
        tuple((-syllables[-i % n][0], -syllables[(-i - 1) % n][1]) for i in range(n))
    )


def power_word(word: TightWord, exponent: int) -> TightWord:
    """The tight word of g^k for k >= 1."""
    if exponent < 1:
        raise ValueError(f"power_word needs a positive exponent, got {exponent}")
    return TightWord(word.syllables * exponent)


# --------------------------------------------------------------------- #
#                              INVARIANTS                               #
# --------------------------------------------------------------------- #
def h_value(word: TightWord) -> int:
    """Returns the t-exponent sum of a word."""
    return sum(word.signs)


def arcs(word: TightWord, loop_index: int = 0) -> list[Arc]:
    """Cuts a tight loop into its arcs.

    The partial sums defining mu and lambda start with the t-letter right
    after the arc: S_k = eps_i + ... + eps_{i+k-1} for k = 0..n.

    Parameters
    ----------
    word : TightWord
        The loop.
    loop_index : int
        Position of the loop in its chain.

    Returns
    ----------
    list[Arc]
        One arc per syllable, in order.
    """
    n = word.n
    signs = word.signs
    result = []
    for i, (winding, eps) in enumerate(word.syllables):
        partial, highest, lowest = 0, 0, 0
        for k in range(n):
            partial += signs[(i + k) % n]
            highest = max(highest, partial)
            lowest = min(lowest, partial)
        result.append(
            Arc(loop_index, i + 1, winding, eps, signs[i - 1], highest, -lowest)
        )
    return result


def word_complexity(word: TightWord) -> int:
    """rho(g) = min(max mu, max lambda) over the arcs of g."""
    word_arcs = arcs(word)
    return min(max(arc.mu for arc in word_arcs), max(arc.lam for arc in word_arcs))


def complexity(chain: Chain) -> int:
    """rho(c) = max over the words of the chain."""
    return max((word_complexity(word) for word in chain.words), default=0)


def s_value(word: TightWord, params: GroupParams) -> Fraction:
    """Returns s(g) = sum_j p_j (m/ell)^{k_j}, k_j being the t-exponent read
    before syllable j. Only defined for t-balanced words."""
    if h_value(word) != 0:
        raise UndefinedInvariantError(f"s is undefined for {word}: h = {h_value(word)}")
    ratio = Fraction(params.m, params.ell)
    total, level = Fraction(0), 0
    for p, eps in word.syllables:
        total += p * ratio**level
        level += eps
    return total


def is_t_alternating(word: TightWord) -> bool:
    """Whether consecutive t-letters of the cyclic word have opposite signs,
    which is exactly when every arc has complexity 1."""
    signs = word.signs
    return all(signs[i] == -signs[(i + 1) % len(signs)] for i in range(len(signs)))


# --------------------------------------------------------------------- #
#                           CHAIN UTILITIES                             #
# --------------------------------------------------------------------- #
def _a_power(p: int) -> str:
    if p == 0:
        return ""
    if p == 1:
        return "a"
    if p == -1:
        return "A"
    return f"a^{p}"


def word_to_string(word: TightWord) -> str:
    """Renders a tight word in the chain grammar, syllable by syllable."""
    return "".join(_a_power(p) + ("t" if eps > 0 else "T") for p, eps in word.syllables)


def chain_to_string(chain: Chain) -> str:
    """Renders a chain so that parsing the output reproduces the chain."""
    parts = []
    for coefficient, word in chain.terms:
        prefix = "" if coefficient == 1 else f"{coefficient} "
        parts.append(prefix + word_to_string(word))
    return " + ".join(parts)


def scale_chain(chain: Chain, factor: Fraction) -> Chain:
    """Multiplies every coefficient by a positive rational."""
    factor = Fraction(factor)
    if factor <= 0:
        raise ValueError(f"chains can only be scaled by positive factors, got {factor}")
    return Chain(
        tuple((coef * factor, word) for coef, word in chain.terms), chain.dropped_elliptic
    )


def add_chains(*chains: Chain) -> Chain:
    """Formal sum of chains, merging words equal up to rotation."""
    merged: dict[tuple[Syllable, ...], list] = {}
    dropped: list[str] = []
    for chain in chains:
        dropped.extend(chain.dropped_elliptic)
        for coefficient, word in chain.terms:
            key = canonical_key(word)
            if key in merged:
                merged[key][0] += coefficient
            else:
                merged[key] = [coefficient, word]
    return Chain(tuple((c, w) for c, w in merged.values()), tuple(dropped))


def chain_of(*terms: tuple[Fraction, TightWord]) -> Chain:
    """Builds a chain from (coefficient, word) pairs."""
    return add_chains(*(Chain(((Fraction(c), w),)) for c, w in terms))
