"""Browkin I / II / II* continued fraction expansions with exact cycle detection.

The driver walks complete quotients alpha_n as exact `QuadInt` values. A
repeated (alpha_n, n mod 2) state is a periodicity witness; alpha_n equal to
its own partial quotient ends a finite expansion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sympy import factorint

from utils.padic_core import (
    INFINITY,
    PartialQuotient,
    Prime,
    require_odd_prime,
    s_floor,
    t_floor,
    vp_rational,
)
from utils.quad_field import (
    DEFAULT_INITIAL_PRECISION,
    DEFAULT_PRECISION_CAP,
    HenselRoot,
    QuadInt,
    digits_of_quad,
    quad_add_rational,
    quad_invert,
    quad_sub_rational,
    root_for,
    vp_quad,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 20_000


class ReconstructionError(RuntimeError):
    """An expansion does not fold back to the value it was computed from."""


class AlgorithmKind(str, Enum):
    BROWKIN_I = "browkin1"
    BROWKIN_II = "browkin2"
    BROWKIN_II_STAR = "browkin2star"

    @property
    def alternating(self) -> bool:
        return self is not AlgorithmKind.BROWKIN_I

    def uses_s(self, n: int) -> bool:
        """Whether step ``n`` takes s (otherwise t with the sign correction)."""

        if self is AlgorithmKind.BROWKIN_I:
            return True
        if self is AlgorithmKind.BROWKIN_II:
            return n % 2 == 0
        return n % 2 == 1


class Status(str, Enum):
    FINITE = "FINITE"
    PERIODIC = "PERIODIC"
    CAPPED = "CAPPED"


@dataclass(frozen=True)
class CqState:
    """Complete quotient plus step parity (None for Browkin I)."""

    cq: QuadInt
    parity: Optional[int]


@dataclass(frozen=True)
class StepResult:
    quotient: PartialQuotient
    next: Optional[QuadInt]  # None when the expansion ends here
    sign_corrected: bool = False


@dataclass(frozen=True)
class Expansion:
    algorithm: AlgorithmKind
    prime: Prime
    input: QuadInt
    quotients: Tuple[PartialQuotient, ...]
    status: Status
    h: Optional[int] = None
    k: Optional[int] = None
    sign_branch_log: Tuple[int, ...] = ()
    witness: Optional[CqState] = None

    @property
    def preperiod(self) -> Tuple[PartialQuotient, ...]:
        if self.status is Status.PERIODIC:
            return self.quotients[: self.h]
        return self.quotients

    @property
    def period(self) -> Optional[Tuple[PartialQuotient, ...]]:
        if self.status is Status.PERIODIC:
            return self.quotients[self.h : self.h + self.k]
        return None

    @property
    def steps_used(self) -> int:
        return len(self.quotients)

    def take(self, n: int) -> List[PartialQuotient]:
        """First ``n`` quotients, continuing a periodic expansion around its period."""

        if self.status is not Status.PERIODIC or n <= len(self.quotients):
            return list(self.quotients[:n])
        out = list(self.quotients)
        period = self.period or ()
        while len(out) < n:
            out.append(period[(len(out) - self.h) % self.k])
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.prime,
            "algorithm": self.algorithm.value,
            "input": str(self.input),
            "status": self.status.value,
            "preperiod": [str(b) for b in self.preperiod],
            "period": [str(b) for b in self.period] if self.period is not None else [],
            "h": self.h,
            "k": self.k,
            "sign_branch_indices": list(self.sign_branch_log),
            "steps_used": self.steps_used,
        }

    def text(self) -> str:
        head = ", ".join(str(b) for b in self.preperiod)
        if self.status is Status.PERIODIC:
            tail = "overline(" + ", ".join(str(b) for b in self.period or ()) + ")"
            body = f"{head}, {tail}" if head else tail
        elif self.status is Status.CAPPED:
            body = f"{head}, ..."
        else:
            body = head
        return f"[{body}]"


@dataclass(frozen=True)
class Convergents:
    """A_n and B_n for n = 0..len-1 from the standard three-term recurrence."""

    A: Tuple[Fraction, ...]
    B: Tuple[Fraction, ...]

    def ratio(self, n: int) -> Optional[Fraction]:
        if self.B[n] == 0:
            return None
        return self.A[n] / self.B[n]


def _sign(q: Fraction) -> int:
    return (q > 0) - (q < 0)


def step(x: QuadInt, n: int, kind: AlgorithmKind, root: HenselRoot) -> StepResult:
    """One step of ``kind`` at index ``n``: the partial quotient and 1/(x - b)."""

    p = root.prime
    if x.is_zero:
        return StepResult(PartialQuotient(p, 0), None)

    v = vp_quad(x, root)
    approx = digits_of_quad(x, root, min(v, 0), 0)
    sign_corrected = False
    if kind.uses_s(n):
        b = s_floor(approx)
    else:
        b = t_floor(approx)
        exact_hit = x.is_rational and x.as_fraction() == b.value
        if not exact_hit and approx.digit(0) == 0:
            # v_p(x - t(x)) != 0
            b = PartialQuotient.from_fraction(b.value - _sign(b.value), p)
            sign_corrected = True

    remainder = quad_sub_rational(x, b.value)
    if remainder.is_zero:
        return StepResult(b, None, sign_corrected)
    return StepResult(b, quad_invert(remainder), sign_corrected)


def expand(
    x: QuadInt,
    kind: AlgorithmKind,
    p: Prime,
    max_steps: int = DEFAULT_MAX_STEPS,
    initial_precision: int = DEFAULT_INITIAL_PRECISION,
    precision_cap: int = DEFAULT_PRECISION_CAP,
) -> Expansion:
    """Expand ``x`` in Q_p until it terminates, repeats a state, or hits ``max_steps``.

    Raises:
        ValueError: Bad prime, step limit, or Browkin II* input with v_p(x) >= 0.
        PrecisionCapError: The root would need more digits than ``precision_cap``.
    """

    require_odd_prime(p)
    if max_steps < 1:
        raise ValueError(f"max_steps must be at least 1, got {max_steps}")
    kind = AlgorithmKind(kind)
    root = root_for(x, p, initial_precision, precision_cap)
    if kind is AlgorithmKind.BROWKIN_II_STAR and (x.is_zero or vp_quad(x, root) >= 0):
        raise ValueError(f"Browkin II* needs v_p(x) < 0, got x = {x}")

    seen: Dict[CqState, int] = {}
    quotients: List[PartialQuotient] = []
    sign_log: List[int] = []
    alpha = x

    def state_at(n: int, value: QuadInt) -> CqState:
        return CqState(value, n % 2 if kind.alternating else None)

    for n in range(max_steps + 1):
        state = state_at(n, alpha)
        if state in seen:
            h = seen[state]
            result = Expansion(
                kind, p, x, tuple(quotients), Status.PERIODIC, h, n - h, tuple(sign_log), state
            )
            logger.info("Expanded %s in Q_%d (%s): periodic h=%d k=%d", x, p, kind.value, h, n - h)
            return result
        if n == max_steps:
            break
        seen[state] = n
        result_step = step(alpha, n, kind, root)
        quotients.append(result_step.quotient)
        if result_step.sign_corrected:
            sign_log.append(n)
        if result_step.next is None:
            logger.info("Expanded %s in Q_%d (%s): finite after %d steps", x, p, kind.value, n + 1)
            return Expansion(kind, p, x, tuple(quotients), Status.FINITE, sign_branch_log=tuple(sign_log))
        alpha = result_step.next

    logger.warning("Expansion of %s in Q_%d (%s) capped at %d steps", x, p, kind.value, max_steps)
    return Expansion(kind, p, x, tuple(quotients), Status.CAPPED, sign_branch_log=tuple(sign_log))


def convergents(bs: Sequence[PartialQuotient]) -> Convergents:
    if not bs:
        raise ValueError("convergents need at least one partial quotient")
    A: List[Fraction] = []
    B: List[Fraction] = []
    a2, a1 = Fraction(0), Fraction(1)
    b2, b1 = Fraction(1), Fraction(0)
    for q in bs:
        value = Fraction(q.value) if isinstance(q, PartialQuotient) else Fraction(q)
        a2, a1 = a1, value * a1 + a2
        b2, b1 = b1, value * b1 + b2
        A.append(a1)
        B.append(b1)
    return Convergents(tuple(A), tuple(B))


def valuation_identities_hold(bs: Sequence[PartialQuotient], conv: Convergents, p: Prime) -> bool:
    """v_p(A_n) = sum_{i<=n} v_p(b_i) and v_p(B_n) = sum_{1<=i<=n} v_p(b_i) at every prefix.

    With b_0 = 0 the A-sum starts at i = 2, because A_n/B_n = 1/[b_1, ..., b_n].
    """

    vals = [b.valuation for b in bs]
    shifted = bs[0].numerator == 0
    for n in range(len(bs)):
        expected_b = sum(vals[1 : n + 1])
        if shifted:
            expected_a = INFINITY if n == 0 else sum(vals[2 : n + 1])
        else:
            expected_a = sum(vals[: n + 1])
        if vp_rational(conv.A[n], p) != expected_a or vp_rational(conv.B[n], p) != expected_b:
            return False
    return True


def convergence_valuations(x: QuadInt, conv: Convergents, root: HenselRoot) -> List[float]:
    """v_p(x - A_n/B_n) for each n; INFINITY where the convergent equals x."""

    out: List[float] = []
    for n in range(len(conv.A)):
        ratio = conv.ratio(n)
        if ratio is None:
            continue
        diff = quad_sub_rational(x, ratio)
        out.append(INFINITY if diff.is_zero else vp_quad(diff, root))
    return out


def strictly_increasing(values: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


def parity_law_holds(e: Expansion) -> bool:
    """Valuation alternation of the quotients for Browkin II / II*.

    Browkin II: v_p(b_even) = 0, v_p(b_odd) < 0. Browkin II*: the reverse.
    Index 0 is only checked when the input satisfies the law's hypothesis.
    """

    if not e.algorithm.alternating:
        return True
    root = root_for(e.input, e.prime)
    v0 = vp_quad(e.input, root) if not e.input.is_zero else INFINITY
    for n, b in enumerate(e.take(len(e.quotients))):
        unit_step = e.algorithm.uses_s(n)
        if n == 0 and not (v0 == 0 if unit_step else v0 < 0):
            continue
        if unit_step and b.valuation != 0:
            return False
        if not unit_step and not b.valuation < 0:
            return False
    return True


def replay_period(e: Expansion) -> bool:
    """Re-run `step` from the witness state for k steps and compare with the period."""

    if e.status is not Status.PERIODIC or e.witness is None:
        return False
    root = root_for(e.input, e.prime)
    alpha = e.witness.cq
    for offset, expected in enumerate(e.period or ()):
        result = step(alpha, e.h + offset, e.algorithm, root)
        if result.quotient != expected or result.next is None:
            return False
        alpha = result.next
    return alpha == e.witness.cq


def _fold(bs: Sequence[PartialQuotient], tail: Optional[QuadInt]) -> QuadInt:
    value = tail
    for b in reversed(bs):
        value = QuadInt.rational(b.value) if value is None else quad_add_rational(quad_invert(value), b.value)
    if value is None:
        raise ReconstructionError("nothing to fold")
    return value


def squarefree_kernel(n: int) -> int:
    kernel = -1 if n < 0 else 1
    for prime, exp in factorint(abs(n)).items():
        if exp % 2:
            kernel *= prime
    return kernel


def reconstruct(e: Expansion, D: Optional[int] = None, branch: int = 1) -> QuadInt:
    """Fold an expansion back into the exact value it represents.

    The radicand comes from ``e.input`` when it is irrational, else from ``D``,
    else from the squarefree kernel of the periodic tail's discriminant.

    Raises:
        ReconstructionError: The expansion is CAPPED, inconsistent, or does
            not reproduce ``e.input``.
    """

    if e.status is Status.CAPPED:
        raise ReconstructionError("a capped expansion has no exact value")
    if e.status is Status.FINITE:
        value = _fold(e.quotients, None)
    else:
        value = _fold(e.preperiod, _periodic_tail(e, D, branch))

    if value != e.input:
        raise ReconstructionError(f"expansion folds to {value}, input was {e.input}")
    return value


def _periodic_tail(e: Expansion, D: Optional[int], branch: int) -> QuadInt:
    period = e.period or ()
    conv = convergents(period)
    k = len(period)
    A1, B1 = conv.A[k - 1], conv.B[k - 1]
    A2, B2 = (conv.A[k - 2], conv.B[k - 2]) if k >= 2 else (Fraction(1), Fraction(0))
    # B1*beta^2 + (B2 - A1)*beta - A2 = 0
    P, Q, R = B1, B2 - A1, -A2
    disc = Q * Q - 4 * P * R
    if P == 0 or disc == 0:
        raise ReconstructionError("periodic tail does not define a quadratic irrational")

    if not e.input.is_rational:
        radicand, branch = e.input.D, e.input.branch
    else:
        radicand = D if D is not None else squarefree_kernel(disc.numerator * disc.denominator)
    ratio = disc / radicand
    num_root, den_root = math.isqrt(abs(ratio.numerator)), math.isqrt(ratio.denominator)
    if ratio < 0 or num_root ** 2 != ratio.numerator or den_root ** 2 != ratio.denominator:
        raise ReconstructionError(f"discriminant {disc} is not a rational square times {radicand}")
    delta = Fraction(num_root, den_root)

    root = HenselRoot(e.prime, radicand, branch)
    for sign in (1, -1):
        # beta = (-Q + sign*delta*sqrt(D)) / (2P)
        num = Fraction(-Q) / (2 * P)
        coeff = sign * delta / (2 * P)
        common = math.lcm(num.denominator, coeff.denominator)
        beta = QuadInt.of(int(num * common), int(coeff * common), common, radicand, branch)
        if _replays(beta, e, root):
            return beta
    raise ReconstructionError("neither root of the periodic quadratic reproduces the period")


def _replays(beta: QuadInt, e: Expansion, root: HenselRoot) -> bool:
    alpha = beta
    for offset, expected in enumerate(e.period or ()):
        result = step(alpha, e.h + offset, e.algorithm, root)
        if result.quotient != expected or result.next is None:
            return False
        alpha = result.next
    return alpha == beta
