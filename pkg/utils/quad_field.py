"""Exact quadratic irrationals (a + b*sqrt(D))/c and their embedding in Q_p.

`QuadInt` is an immutable value in canonical form. `HenselRoot` holds a lazily
extended p-adic square root of D, one of the two Hensel branches, and is what
turns a `QuadInt` into balanced digits and valuations.
"""

from __future__ import annotations

import logging
import math
import re
import threading
from dataclasses import dataclass
from fractions import Fraction

from sympy import sqrt_mod
from sympy.ntheory.residue_ntheory import is_quad_residue

from utils.padic_core import (
    PAdicApprox,
    Prime,
    RationalLike,
    balanced_digits,
    balanced_expansion,
    balanced_residue,
    vp_int,
    vp_rational,
)

logger = logging.getLogger(__name__)

DEFAULT_INITIAL_PRECISION = 64
DEFAULT_PRECISION_CAP = 1 << 20

_QUAD_RE = re.compile(
    r"\(\s*(-?\d+)\s*([+-])\s*(\d+)\s*\*\s*sqrt\(\s*(-?\d+)\s*\)\s*\)\s*/\s*(-?\d+)"
)
_RATIONAL_RE = re.compile(r"(-?\d+)(?:\s*/\s*(-?\d+))?")


class PrecisionCapError(RuntimeError):
    """A root extension would exceed the configured digit cap."""


def _is_perfect_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


@dataclass(frozen=True)
class QuadInt:
    """The number (a + b*sqrt(D))/c with ``branch`` naming the p-adic root of D.

    Canonical form: gcd(a, b, c) = 1, c > 0, and rationals (b = 0) carry
    D = 0 and branch = +1. Build values with `QuadInt.of`.
    """

    a: int
    b: int
    c: int
    D: int = 0
    branch: int = 1

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError(f"denominator c must be positive in canonical form, got {self.c}")
        if math.gcd(self.a, self.b, self.c) != 1:
            raise ValueError(f"({self.a}, {self.b}, {self.c}) is not reduced")
        if self.branch not in (1, -1):
            raise ValueError(f"branch must be +1 or -1, got {self.branch}")
        if self.b == 0:
            if self.D != 0 or self.branch != 1:
                raise ValueError("rational values carry D = 0 and branch = +1")
        elif self.D == 0 or _is_perfect_square(self.D):
            raise ValueError(f"radicand D={self.D} must be a non-square integer")

    @classmethod
    def of(cls, a: int, b: int = 0, c: int = 1, D: int = 0, branch: int = 1) -> "QuadInt":
        if c == 0:
            raise ValueError("denominator c must be nonzero")
        if b == 0 or D == 0:
            b, D, branch = 0, 0, 1
        g = math.gcd(a, b, c)
        a, b, c = a // g, b // g, c // g
        if c < 0:
            a, b, c = -a, -b, -c
        return cls(a, b, c, D, branch)

    @classmethod
    def rational(cls, q: RationalLike) -> "QuadInt":
        q = Fraction(q)
        return cls.of(q.numerator, 0, q.denominator)

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    @property
    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b:
            raise ValueError(f"{self} is not rational")
        return Fraction(self.a, self.c)

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a) if self.c == 1 else f"{self.a}/{self.c}"
        sign = "+" if self.b > 0 else "-"
        return f"({self.a}{sign}{abs(self.b)}*sqrt({self.D}))/{self.c}"


def parse_quad(text: str, branch: int = 1) -> QuadInt:
    """Parse "(a+b*sqrt(D))/c" or "a/c" (the exact `str` form, no evaluation)."""

    value = (text or "").strip()
    m = _QUAD_RE.fullmatch(value)
    if m:
        a, sign, b, D, c = m.groups()
        bb = int(b) if sign == "+" else -int(b)
        if int(c) == 0:
            raise ValueError(f"input {text!r}: denominator c must be nonzero")
        if _is_perfect_square(int(D)) and bb != 0:
            raise ValueError(f"input {text!r}: radicand D={D} is a perfect square")
        return QuadInt.of(int(a), bb, int(c), int(D), branch)
    m = _RATIONAL_RE.fullmatch(value)
    if m:
        den = int(m.group(2) or 1)
        if den == 0:
            raise ValueError(f"input {text!r}: denominator must be nonzero")
        return QuadInt.of(int(m.group(1)), 0, den)
    raise ValueError(f"input {text!r}: expected '(a+b*sqrt(D))/c' or 'a/c'")


def sqrt_exists(D: int, p: Prime) -> bool:
    """True iff D is a nonzero square in Q_p (even valuation, residue unit part)."""

    if D == 0:
        raise ValueError("D must be nonzero")
    v = vp_int(D, p)
    if v % 2:
        return False
    unit = D // p ** v
    return is_quad_residue(unit % p, p)


class HenselRoot:
    """A p-adic square root of D, extended in place by Newton/Hensel lifting.

    D = p^(2m) * u with u a unit; the root is p^m * r where r^2 = u and r is
    stored mod p^precision. The canonical branch (+1) has its leading
    balanced digit in {1, ..., (p-1)/2}; branch -1 is its negative.
    Extensions are serialised by an internal lock.
    """

    def __init__(
        self,
        prime: Prime,
        D: int,
        branch: int = 1,
        initial_precision: int = DEFAULT_INITIAL_PRECISION,
        precision_cap: int = DEFAULT_PRECISION_CAP,
    ) -> None:
        if branch not in (1, -1):
            raise ValueError(f"branch must be +1 or -1, got {branch}")
        self.prime = prime
        self.D = D
        self.branch = branch
        self.precision_cap = precision_cap
        self._lock = threading.Lock()

        if D == 0:
            self.offset = 0
            self.unit_radicand = 0
            self._residue = 0
            self._precision = 0
            return

        if not sqrt_exists(D, prime):
            raise ValueError(f"D={D} has no square root in Q_{prime}")
        v = int(vp_int(D, prime))
        self.offset = v // 2
        self.unit_radicand = D // prime ** v
        r0 = balanced_residue(int(sqrt_mod(self.unit_radicand % prime, prime)), prime)
        r0 = abs(r0) * branch
        self._residue = r0 % prime
        self._precision = 1
        self.ensure(min(initial_precision, precision_cap))

    @classmethod
    def rational(cls, prime: Prime) -> "HenselRoot":
        """Null root used for values with b = 0."""

        return cls(prime, 0)

    @property
    def precision(self) -> int:
        return self._precision

    def ensure(self, precision: int) -> None:
        """Make the root known mod p^precision, doubling the current precision as needed."""

        if self.D == 0 or precision <= self._precision:
            return
        if precision > self.precision_cap:
            raise PrecisionCapError(
                f"sqrt({self.D}) in Q_{self.prime} needs {precision} digits, cap is {self.precision_cap}"
            )
        with self._lock:
            target = max(precision, min(2 * self._precision, self.precision_cap))
            p, u = self.prime, self.unit_radicand
            r, k = self._residue, self._precision
            while k < target:
                k = min(2 * k, target)
                modulus = p ** k
                r = (r - (r * r - u) * pow(2 * r, -1, modulus)) % modulus
            self._residue, self._precision = r, k
        logger.debug("Extended sqrt(%d) in Q_%d to %d digits", self.D, self.prime, self._precision)

    def residue(self, precision: int) -> int:
        """r mod p^precision, where the root is p^offset * r."""

        if self.D == 0 or precision <= 0:
            return 0
        self.ensure(precision)
        return self._residue % self.prime ** precision

    def approximation(self) -> PAdicApprox:
        """Balanced digits of sqrt(D) known so far."""

        if self.D == 0:
            return PAdicApprox.zero(self.prime)
        digits = balanced_expansion(self._residue, self.prime, self._precision)
        return PAdicApprox(self.prime, self.offset, tuple(digits))

    @property
    def leading_digit(self) -> int:
        return self.approximation().digits[0]


def hensel_sqrt(
    D: int,
    p: Prime,
    precision: int,
    branch: int = 1,
    precision_cap: int = DEFAULT_PRECISION_CAP,
) -> HenselRoot:
    """Root of D in Q_p with at least ``precision`` balanced digits."""

    if D == 0:
        raise ValueError("D must be nonzero")
    if precision < 1:
        raise ValueError(f"precision must be at least 1, got {precision}")
    root = HenselRoot(p, D, branch, initial_precision=precision, precision_cap=precision_cap)
    root.ensure(precision)
    return root


def root_for(
    x: QuadInt,
    p: Prime,
    initial_precision: int = DEFAULT_INITIAL_PRECISION,
    precision_cap: int = DEFAULT_PRECISION_CAP,
) -> HenselRoot:
    """The root object that embeds ``x`` in Q_p."""

    if x.is_rational:
        return HenselRoot.rational(p)
    return HenselRoot(p, x.D, x.branch, initial_precision, precision_cap)


def _check_root(x: QuadInt, root: HenselRoot) -> None:
    if x.b and (x.D != root.D or x.branch != root.branch):
        raise ValueError(
            f"root sqrt({root.D}) branch {root.branch} does not match {x} branch {x.branch}"
        )


def _common_radicand(x: QuadInt, y: QuadInt) -> tuple:
    if x.b and y.b and (x.D, x.branch) != (y.D, y.branch):
        raise ValueError(f"{x} and {y} live over different roots")
    return (x.D, x.branch) if x.b else (y.D, y.branch)


def quad_sub_rational(x: QuadInt, q: RationalLike) -> QuadInt:
    q = Fraction(q)
    u, w = q.numerator, q.denominator
    return QuadInt.of(x.a * w - u * x.c, x.b * w, x.c * w, x.D, x.branch)


def quad_add_rational(x: QuadInt, q: RationalLike) -> QuadInt:
    return quad_sub_rational(x, -Fraction(q))


def quad_invert(x: QuadInt) -> QuadInt:
    if x.is_zero:
        raise ValueError("cannot invert zero")
    if x.b == 0:
        return QuadInt.of(x.c, 0, x.a)
    norm = x.a * x.a - x.b * x.b * x.D
    return QuadInt.of(x.c * x.a, -x.c * x.b, norm, x.D, x.branch)


def quad_mul(x: QuadInt, y: QuadInt) -> QuadInt:
    D, branch = _common_radicand(x, y)
    return QuadInt.of(
        x.a * y.a + x.b * y.b * D,
        x.a * y.b + x.b * y.a,
        x.c * y.c,
        D,
        branch,
    )


def conjugate(x: QuadInt) -> QuadInt:
    return QuadInt.of(x.a, -x.b, x.c, x.D, x.branch)


def vp_quad(x: QuadInt, root: HenselRoot) -> int:
    """Exact p-adic valuation of ``x``, extending the root until a digit is certified."""

    if x.is_zero:
        raise ValueError("valuation of zero requested")
    p = root.prime
    if x.b == 0:
        return int(vp_rational(x.as_fraction(), p))
    _check_root(x, root)
    scale = x.b * p ** root.offset
    k = max(root.precision, 1)
    while True:
        residue = (x.a + scale * root.residue(k)) % p ** k
        if residue:
            return int(vp_int(residue, p)) - int(vp_int(x.c, p))
        k *= 2


def digits_of_quad(x: QuadInt, root: HenselRoot, lo: int, hi: int) -> PAdicApprox:
    """Balanced digits of the embedding of ``x`` at indices ``lo..hi``."""

    if lo > hi:
        raise ValueError(f"lo={lo} must not exceed hi={hi}")
    p = root.prime
    if x.b == 0:
        return balanced_digits(x.as_fraction(), p, lo, hi)
    _check_root(x, root)

    # x = y / p^vc with y a p-adic integer
    vc = int(vp_int(x.c, p))
    c_unit = x.c // p ** vc
    needed = hi + vc + 1
    width = hi - lo + 1
    if needed <= 0:
        return PAdicApprox(p, lo, (0,) * width)
    modulus = p ** needed
    numerator = (x.a + x.b * p ** root.offset * root.residue(needed)) % modulus
    y = numerator * pow(c_unit, -1, modulus) % modulus
    y_digits = balanced_expansion(y, p, needed)
    digits = tuple(y_digits[i + vc] if i + vc >= 0 else 0 for i in range(lo, hi + 1))
    return PAdicApprox(p, lo, digits)
