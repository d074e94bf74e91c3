"""Slow cross-check of the exact engine over truncated p-adic digit windows.

Nothing here touches `QuadInt` arithmetic or `HenselRoot`: square roots are
lifted one digit at a time, values are (valuation, unit residue, width)
windows, and every partial quotient is read off the window. Runs that would
need digits beyond the window raise `PrecisionFault`; callers retry with a
wider window.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from utils.cf_engine import AlgorithmKind, expand
from utils.quad_field import QuadInt
from utils.theory import SuiteReport

logger = logging.getLogger(__name__)

MIN_GUARD = 8
DEFAULT_PRIMES = (3, 5, 7, 11, 13)

# (a, b, c, D): the number (a + b*sqrt(D))/c
QuadDescription = Tuple[int, int, int, int]


class PrecisionFault(RuntimeError):
    """The digit window no longer covers the guard margin."""


def _vp(n: int, p: int) -> int:
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _balanced(n: int, p: int) -> int:
    d = n % p
    return d - p if d > p // 2 else d


def _is_square_unit(u: int, p: int) -> bool:
    return pow(u % p, (p - 1) // 2, p) == 1


def lift_sqrt(u: int, p: int, count: int, branch: int = 1) -> int:
    """Root of the unit ``u`` mod p^count, lifted one balanced digit at a time.

    ``branch=1`` starts from the residue in 1..(p-1)/2, ``branch=-1`` from its
    negative.
    """

    r0 = next((r for r in range(1, p // 2 + 1) if (r * r - u) % p == 0), None)
    if r0 is None:
        raise ValueError(f"{u} is not a square mod {p}")
    r = r0 * branch
    power = p
    for _ in range(1, count):
        # (r + d*p^k)^2 = u mod p^(k+1)  <=>  2*r*d = (u - r^2)/p^k mod p
        d = _balanced((u - r * r) // power * pow(2 * r, -1, p), p)
        r += d * power
        power *= p
    return r


@dataclass(frozen=True)
class StreamState:
    """p^valuation * unit, with unit known mod p^width."""

    prime: int
    valuation: int
    unit: int
    width: int
    guard: int = MIN_GUARD

    def __post_init__(self) -> None:
        if self.guard < MIN_GUARD:
            raise ValueError(f"guard must be at least {MIN_GUARD}, got {self.guard}")
        if self.width < self.guard:
            raise PrecisionFault(f"window of {self.width} digits is inside the {self.guard}-digit guard")

    @property
    def absolute_precision(self) -> int:
        """Digits at indices below this are known."""

        return self.valuation + self.width

    def digits(self, top: int) -> List[int]:
        """Balanced digits at indices valuation..top."""

        if top + self.guard >= self.absolute_precision:
            raise PrecisionFault(f"digit {top} requested, window ends at {self.absolute_precision - 1}")
        out: List[int] = []
        n = self.unit
        for _ in range(self.valuation, top + 1):
            d = _balanced(n, self.prime)
            out.append(d)
            n = (n - d) // self.prime
        return out

    def digit(self, index: int) -> int:
        if index < self.valuation:
            return 0
        return self.digits(index)[-1]

    def truncate(self, top: int) -> Fraction:
        """Sum of the digits at indices <= top."""

        p = self.prime
        return sum(
            (Fraction(d) * Fraction(p) ** (self.valuation + i) for i, d in enumerate(self.digits(top))),
            Fraction(0),
        )

    def minus(self, q: Fraction) -> Optional["StreamState"]:
        """self - q, or None when the difference vanishes across the whole window."""

        p = self.prime
        if q == 0:
            return self
        vq = _vp(q.numerator, p) - _vp(q.denominator, p)
        low = min(self.valuation, vq)
        span = self.absolute_precision - low
        modulus = p ** span
        q_unit = (q.numerator // p ** _vp(q.numerator, p)) * pow(
            q.denominator // p ** _vp(q.denominator, p), -1, modulus
        )
        z = (self.unit * p ** (self.valuation - low) - q_unit * p ** (vq - low)) % modulus
        if z == 0:
            return None
        shift = _vp(z, p)
        width = span - shift
        return StreamState(p, low + shift, (z // p ** shift) % p ** width, width, self.guard)

    def inverse(self) -> "StreamState":
        modulus = self.prime ** self.width
        return StreamState(self.prime, -self.valuation, pow(self.unit, -1, modulus), self.width, self.guard)


def stream_of(x: QuadDescription, p: int, width: int, branch: int = 1, guard: int = MIN_GUARD) -> Optional[StreamState]:
    """Window of (a + b*sqrt(D))/c in Q_p; None for zero."""

    a, b, c, D = x
    if c == 0:
        raise ValueError("denominator c must be nonzero")
    if b == 0 or D == 0:
        numerator, known = a, width + _vp(a, p) if a else width
    else:
        vD = _vp(D, p)
        if vD % 2 or not _is_square_unit(D // p ** vD, p):
            raise ValueError(f"D={D} has no square root in Q_{p}")
        m = vD // 2
        r = lift_sqrt(D // p ** vD, p, width, branch)
        known = width + m + _vp(b, p)
        numerator = (a + b * p ** m * r) % p ** known
    if numerator % p ** known == 0:
        if b == 0 or D == 0:
            return None
        raise PrecisionFault(f"numerator of {x} vanishes mod p^{known}")

    vn = _vp(numerator, p)
    vc = _vp(c, p)
    w = known - vn
    modulus = p ** w
    unit = (numerator // p ** vn) * pow(c // p ** vc, -1, modulus) % modulus
    return StreamState(p, vn - vc, unit, w, guard)


def _uses_s(kind: AlgorithmKind, n: int) -> bool:
    if kind is AlgorithmKind.BROWKIN_I:
        return True
    return (n % 2 == 0) == (kind is AlgorithmKind.BROWKIN_II)


def oracle_expand(
    x: QuadDescription,
    p: int,
    kind: AlgorithmKind,
    steps: int,
    width: int,
    branch: int = 1,
    guard: int = MIN_GUARD,
) -> List[Fraction]:
    """First ``steps`` partial quotients of ``x``, fewer if a rational input terminates.

    Raises:
        PrecisionFault: The window ran out; retry with a larger ``width``.
    """

    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    rational = x[1] == 0 or x[3] == 0
    alpha = stream_of(x, p, width, branch, guard)
    if alpha is None:
        return [Fraction(0)]

    out: List[Fraction] = []
    for n in range(steps):
        if _uses_s(kind, n):
            b = alpha.truncate(0)
            rest = alpha.minus(b)
        else:
            b = alpha.truncate(-1)
            rest = alpha.minus(b)
            if rest is not None and alpha.digit(0) == 0:
                b -= (b > 0) - (b < 0)
                rest = alpha.minus(b)
        out.append(b)
        if rest is None:
            if not rational:
                raise PrecisionFault(f"irrational value vanished in the window at step {n}")
            return out
        alpha = rest.inverse()
    return out


@dataclass(frozen=True)
class OracleOutcome:
    quotients: Tuple[Fraction, ...]
    width: int
    inconclusive: bool = False


def oracle_expand_with_retry(
    x: QuadDescription,
    p: int,
    kind: AlgorithmKind,
    steps: int,
    width: int = 256,
    branch: int = 1,
    guard: int = MIN_GUARD,
    retries: int = 4,
) -> OracleOutcome:
    """`oracle_expand`, doubling the window on each fault up to ``retries`` times."""

    for _ in range(retries + 1):
        try:
            return OracleOutcome(tuple(oracle_expand(x, p, kind, steps, width, branch, guard)), width)
        except PrecisionFault as exc:
            logger.info("Oracle fault for %s in Q_%d at width %d: %s", x, p, width, exc)
            width *= 2
    logger.warning("Oracle inconclusive for %s in Q_%d (%s)", x, p, kind.value)
    return OracleOutcome((), width // 2, inconclusive=True)


@dataclass(frozen=True)
class OracleCase:
    p: int
    kind: AlgorithmKind
    x: QuadDescription
    branch: int = 1


def random_quadratic_inputs(
    count: int, seed: int = 2022, primes: Sequence[int] = DEFAULT_PRIMES
) -> List[OracleCase]:
    """Fixed-seed irrational inputs over random primes, radicands and algorithms.

    Browkin II* cases get enough powers of p in c to make v_p(x) negative.
    """

    rng = random.Random(seed)
    kinds = list(AlgorithmKind)
    cases: List[OracleCase] = []
    while len(cases) < count:
        p = rng.choice(primes)
        D = rng.randint(-300, 300)
        if D == 0 or (D > 0 and int(D ** 0.5) ** 2 == D):
            continue
        vD = _vp(D, p)
        if vD % 2 or not _is_square_unit(D // p ** vD, p):
            continue
        kind = rng.choice(kinds)
        branch = rng.choice((1, -1))
        a = rng.randint(-60, 60)
        b = rng.choice([n for n in range(-9, 10) if n])
        c = rng.randint(1, 40)
        if kind is AlgorithmKind.BROWKIN_II_STAR:
            window = stream_of((a, b, c, D), p, 64, branch)
            assert window is not None
            if window.valuation >= 0:
                c *= p ** (window.valuation + 1)
        cases.append(OracleCase(p, kind, (a, b, c, D), branch))
    return cases


def engine_prefix(case: OracleCase, steps: int) -> List[Fraction]:
    a, b, c, D = case.x
    e = expand(QuadInt.of(a, b, c, D, case.branch), case.kind, case.p, max_steps=steps)
    return [q.value for q in e.take(steps)]


def oracle_agreement(
    count: int = 500,
    steps: int = 50,
    seed: int = 2022,
    width: int = 256,
    guard: int = MIN_GUARD,
    retries: int = 4,
) -> SuiteReport:
    """Compare oracle and engine quotient lists on ``count`` random inputs.

    Inconclusive cases are not failures unless they reach 1% of the corpus.
    """

    report = SuiteReport("oracle")
    inconclusive = 0
    for case in random_quadratic_inputs(count, seed):
        outcome = oracle_expand_with_retry(case.x, case.p, case.kind, steps, width, case.branch, guard, retries)
        if outcome.inconclusive:
            inconclusive += 1
            continue
        engine = engine_prefix(case, steps)
        report.check(
            list(outcome.quotients) == engine,
            f"{case.kind.value} {case.x} branch {case.branch:+d} in Q_{case.p}: oracle and engine differ",
        )
    report.check(100 * inconclusive < count, f"{inconclusive}/{count} oracle runs inconclusive")
    logger.info("Oracle agreement: %d checked, %d inconclusive", report.checked, inconclusive)
    return report
