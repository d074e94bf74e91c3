"""Balanced-digit p-adic arithmetic on exact rationals.

Digits are taken in {-(p-1)/2, ..., (p-1)/2}. The module provides valuations,
digit windows (`PAdicApprox`), the floor-like functions s and t, and the
`PartialQuotient` type with its J_p / K_p membership predicates.
"""

from __future__ import annotations

import logging
import math
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple, Union

from sympy import isprime, multiplicity

logger = logging.getLogger(__name__)

# v_p(0)
INFINITY = math.inf

Prime = int
Valuation = Union[int, float]
RationalLike = Union[int, Fraction]


class InsufficientPrecisionError(ValueError):
    """Digits were requested beyond what a non-exact approximation holds."""


def require_odd_prime(p: int) -> Prime:
    """Return ``p`` if it is an odd prime, else raise ValueError."""

    if not isinstance(p, int) or isinstance(p, bool):
        raise ValueError(f"prime must be an integer, got {p!r}")
    if p == 2:
        raise ValueError("prime must be odd; p = 2 is not supported")
    if not isprime(p):
        raise ValueError(f"prime must be prime, got {p}")
    return p


def vp_int(n: int, p: Prime) -> Valuation:
    if n == 0:
        return INFINITY
    return int(multiplicity(p, abs(n)))


def vp_rational(x: RationalLike, p: Prime) -> Valuation:
    """p-adic valuation of a rational; ``INFINITY`` for zero."""

    x = Fraction(x)
    if x == 0:
        return INFINITY
    return vp_int(x.numerator, p) - vp_int(x.denominator, p)


def balanced_residue(n: int, modulus: int) -> int:
    """Representative of ``n`` mod ``modulus`` in (-modulus/2, modulus/2]."""

    r = n % modulus
    if 2 * r > modulus:
        r -= modulus
    return r


def balanced_expansion(n: int, p: Prime, count: int) -> List[int]:
    """First ``count`` balanced digits of the p-adic integer with residue ``n``."""

    half = (p - 1) // 2
    digits: List[int] = []
    for _ in range(count):
        d = n % p
        if d > half:
            d -= p
        digits.append(d)
        n = (n - d) // p
    return digits


@dataclass(frozen=True)
class PAdicApprox:
    """Window of balanced digits of an element of Q_p.

    ``digits[i]`` is the digit at index ``start + i``. Digits below ``start``
    are zero. When ``exact`` is set, every digit above the window is zero too
    (the expansion terminates); otherwise they are unknown. A window may be
    requested below v_p(x), so leading stored digits can be zero; ``valuation``
    skips them.
    """

    prime: Prime
    start: int
    digits: Tuple[int, ...]
    exact: bool = False

    def __post_init__(self) -> None:
        half = (self.prime - 1) // 2
        for d in self.digits:
            if abs(d) > half:
                raise ValueError(f"digit {d} outside balanced range for p={self.prime}")

    @classmethod
    def zero(cls, p: Prime) -> "PAdicApprox":
        return cls(prime=p, start=0, digits=(), exact=True)

    @property
    def precision(self) -> int:
        return len(self.digits)

    @property
    def last_index(self) -> int:
        return self.start + len(self.digits) - 1

    @property
    def valuation(self) -> Valuation:
        """Index of the first nonzero digit; INFINITY for an exact zero."""

        for i, d in enumerate(self.digits):
            if d:
                return self.start + i
        if self.exact:
            return INFINITY
        raise InsufficientPrecisionError(
            f"no nonzero digit through index {self.last_index}; valuation is beyond the window"
        )

    def digit(self, index: int) -> int:
        if index < self.start:
            return 0
        if index > self.last_index:
            if self.exact:
                return 0
            raise InsufficientPrecisionError(
                f"digit at index {index} requested, window ends at {self.last_index}"
            )
        return self.digits[index - self.start]

    def value(self) -> Fraction:
        """Truncated sum of the stored digits."""

        return sum(
            (Fraction(d) * Fraction(self.prime) ** (self.start + i) for i, d in enumerate(self.digits)),
            Fraction(0),
        )

    def __str__(self) -> str:
        body = ",".join(str(d) for d in self.digits)
        tail = "" if self.exact else (",..." if self.digits else "...")
        return f"p={self.prime} v={self.start} digits=[{body}{tail}]"


@dataclass(frozen=True)
class PartialQuotient:
    """An element ``numerator / p**p_exponent`` of Z[1/p] in lowest terms."""

    prime: Prime
    numerator: int
    p_exponent: int = 0

    def __post_init__(self) -> None:
        if self.p_exponent < 0:
            raise ValueError("p_exponent must be non-negative")
        if self.numerator == 0 and self.p_exponent != 0:
            raise ValueError("zero partial quotient must have p_exponent 0")
        if self.numerator != 0 and self.numerator % self.prime == 0:
            raise ValueError(f"numerator {self.numerator} not in lowest terms for p={self.prime}")

    @classmethod
    def from_fraction(cls, value: RationalLike, p: Prime) -> "PartialQuotient":
        value = Fraction(value)
        den = value.denominator
        n = vp_int(den, p)
        if p ** n != den:
            raise ValueError(f"{value} has a denominator that is not a power of {p}")
        if value.numerator % p == 0 and value.numerator != 0:
            raise ValueError(f"{value} has positive {p}-adic valuation; not a partial quotient")
        return cls(prime=p, numerator=value.numerator, p_exponent=n)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.prime ** self.p_exponent)

    @property
    def valuation(self) -> Valuation:
        return INFINITY if self.numerator == 0 else -self.p_exponent

    @property
    def in_j(self) -> bool:
        return 2 * abs(self.numerator) < self.prime ** (self.p_exponent + 1)

    @property
    def in_k(self) -> bool:
        return self.p_exponent >= 1 and 2 * abs(self.numerator) < self.prime ** self.p_exponent

    def to_approx(self) -> PAdicApprox:
        """Exact balanced digits of this quotient."""

        if self.numerator == 0:
            return PAdicApprox.zero(self.prime)
        digits: List[int] = []
        n = self.numerator
        # digits run out once the carry vanishes
        while n != 0:
            d = balanced_residue(n, self.prime)
            digits.append(d)
            n = (n - d) // self.prime
        return PAdicApprox(self.prime, -self.p_exponent, tuple(digits), exact=True)

    def __str__(self) -> str:
        if self.p_exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/{self.prime ** self.p_exponent}"

    @classmethod
    def parse(cls, text: str, p: Prime) -> "PartialQuotient":
        m = re.fullmatch(r"\s*(-?\d+)(?:\s*/\s*(\d+))?\s*", text)
        if not m:
            raise ValueError(f"malformed partial quotient: {text!r}")
        den = int(m.group(2) or 1)
        return cls.from_fraction(Fraction(int(m.group(1)), den), p)


def balanced_digits(x: RationalLike, p: Prime, lo: int, hi: int) -> PAdicApprox:
    """Balanced digits of the rational ``x`` at indices ``lo..hi``.

    Digits are produced by reduction mod p with a carry into the next index,
    on exact integers.
    """

    if lo > hi:
        raise ValueError(f"lo={lo} must not exceed hi={hi}")
    x = Fraction(x)
    width = hi - lo + 1
    if x == 0:
        return PAdicApprox(p, lo, (0,) * width)

    v = int(vp_rational(x, p))
    unit = x / Fraction(p) ** v
    num, den = unit.numerator, unit.denominator
    inv_den = pow(den, -1, p)
    half = (p - 1) // 2

    digits = [0] * width
    index = v
    while index <= hi:
        d = (num * inv_den) % p
        if d > half:
            d -= p
        if index >= lo:
            digits[index - lo] = d
        num = (num - d * den) // p
        index += 1
    return PAdicApprox(p, lo, tuple(digits))


def _truncated_sum(x: PAdicApprox, top: int) -> Fraction:
    if x.start > top:
        return Fraction(0)
    if x.last_index < top and not x.exact:
        raise InsufficientPrecisionError(
            f"need digits through index {top}, approximation ends at {x.last_index}"
        )
    total = Fraction(0)
    for index in range(x.start, top + 1):
        d = x.digit(index)
        if d:
            total += Fraction(d) * Fraction(x.prime) ** index
    return total


def s_floor(x: PAdicApprox) -> PartialQuotient:
    """s(x): sum of the digits at indices <= 0. Always lies in J_p."""

    return PartialQuotient.from_fraction(_truncated_sum(x, 0), x.prime)


def t_floor(x: PAdicApprox) -> PartialQuotient:
    """t(x): sum of the digits at indices <= -1. Lies in K_p or is zero."""

    return PartialQuotient.from_fraction(_truncated_sum(x, -1), x.prime)


def sample_j(p: Prime, rng: random.Random, max_exponent: int = 6) -> PartialQuotient:
    """Uniform-ish sample of J_p: a0/p^n with |a0| < p^(n+1)/2."""

    n = rng.randint(0, max_exponent)
    bound = (p ** (n + 1) - 1) // 2
    return PartialQuotient.from_fraction(Fraction(rng.randint(-bound, bound), p ** n), p)


def sample_k(p: Prime, rng: random.Random, max_exponent: int = 6) -> PartialQuotient:
    """Sample of K_p: a0/p^n with n >= 1 and |a0| < p^n/2, nonzero."""

    while True:
        n = rng.randint(1, max_exponent)
        bound = (p ** n - 1) // 2
        a0 = rng.randint(-bound, bound)
        if a0:
            return PartialQuotient.from_fraction(Fraction(a0, p ** n), p)

