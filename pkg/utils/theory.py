"""Falsification harnesses for the periodicity results on Browkin II / II*.

Checkers return structured reports rather than asserting, so that scans can
collect counterexample candidates (each of which would be an engine bug).
Also holds the explicit period-4 family of square roots, the bulk scanner
gathering evidence on period lengths, and the named verification suites.
"""

from __future__ import annotations

import csv
import logging
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

from utils.cf_engine import (
    AlgorithmKind,
    Expansion,
    Status,
    convergence_valuations,
    convergents,
    expand,
    parity_law_holds,
    reconstruct,
    replay_period,
    squarefree_kernel,
    step,
    strictly_increasing,
    valuation_identities_hold,
)
from utils.config import Settings
from utils.padic_core import (
    PartialQuotient,
    Prime,
    RationalLike,
    balanced_digits,
    require_odd_prime,
    s_floor,
    sample_j,
    sample_k,
    t_floor,
    vp_int,
    vp_rational,
)
from utils.quad_field import (
    DEFAULT_PRECISION_CAP,
    QuadInt,
    _is_perfect_square,
    conjugate,
    root_for,
    sqrt_exists,
    vp_quad,
)

logger = logging.getLogger(__name__)

CSV_HEADER = ["p", "D", "input", "algorithm", "status", "h", "k", "steps", "sign_branch_count", "parity_ok"]
SUITES = ("lemmas", "galois", "parity", "family", "oracle")

# (input, prime, algorithm, expected preperiod, expected period)
KNOWN_EXPANSIONS = {
    "sqrt30_plus_3": (
        QuadInt.of(3, 1, 1, 30),
        7,
        AlgorithmKind.BROWKIN_II,
        ["-1", "3/7", "3", "2/7"],
        ["1", "2/7", "-2", "3/7", "1", "2/7", "2", "1/7", "-1", "-5/7"],
    ),
    "sqrt79_over_75": (
        QuadInt.of(2, 1, 75, 79),
        5,
        AlgorithmKind.BROWKIN_II_STAR,
        ["-7/25", "1", "2/5", "2", "-2/5", "1", "1/5", "2", "-4/25", "2", "1/5", "1", "-2/5", "2", "2/5"],
        ["1", "-7/25", "-1", "1/5", "2", "9/25", "-1", "-3/5"],
    ),
}


# ── Galois-type necessary conditions ───────────────────────────────────────────


@dataclass(frozen=True)
class GaloisReport:
    algorithm: AlgorithmKind
    alpha_valuation: int
    conj_valuation: int
    norm_alpha_is_one: bool
    norm_conj_lt_one: bool
    pure_periodic: bool
    conditions_met: Optional[bool]  # None: Browkin I has no such condition
    converse_fails: bool

    @property
    def implication_holds(self) -> bool:
        return not self.pure_periodic or self.conditions_met is not False


def check_galois_necessary(x: QuadInt, e: Expansion) -> GaloisReport:
    """Check |x|_p = 1, |conj x|_p < 1 (Browkin II) or v_p(x) < 0, v_p(conj x) = 0 (II*)."""

    root = root_for(x, e.prime)
    alpha_val = vp_quad(x, root)
    conj_val = vp_quad(conjugate(x), root)
    pure = e.status is Status.PERIODIC and e.h == 0
    if e.algorithm is AlgorithmKind.BROWKIN_II:
        conditions: Optional[bool] = alpha_val == 0 and conj_val > 0
    elif e.algorithm is AlgorithmKind.BROWKIN_II_STAR:
        conditions = alpha_val < 0 and conj_val == 0
    else:
        conditions = None
    return GaloisReport(
        algorithm=e.algorithm,
        alpha_valuation=alpha_val,
        conj_valuation=conj_val,
        norm_alpha_is_one=alpha_val == 0,
        norm_conj_lt_one=conj_val > 0,
        pure_periodic=pure,
        conditions_met=conditions,
        converse_fails=bool(conditions) and e.status is Status.PERIODIC and not pure,
    )


def check_pure_candidate_sqrt(a: int, D: int, p: Prime) -> bool:
    """a + sqrt(D) has |.|_p = 1 and conjugate |.|_p < 1 iff a = a_0 mod p.

    a_0 is the leading balanced digit of the canonical root. The digit test is
    cross-checked against the valuations of a +/- sqrt(D).
    """

    if not sqrt_exists(D, p) or vp_int(D, p) != 0:
        raise ValueError(f"need a unit square D in Q_{p}, got D={D}")
    x = QuadInt.of(a, 1, 1, D)
    root = root_for(x, p)
    by_digit = (a - root.leading_digit) % p == 0
    by_valuation = vp_quad(x, root) == 0 and vp_quad(conjugate(x), root) > 0
    if by_digit != by_valuation:
        raise RuntimeError(f"digit and valuation tests disagree for a={a}, D={D}, p={p}")
    return by_digit


def _is_plain_sqrt(x: QuadInt) -> bool:
    return x.a == 0 and x.b == 1 and x.c == 1


def check_preperiod_parity(e: Expansion, x: QuadInt) -> bool:
    """Preperiod parity constraints that apply to ``x``; vacuously True if none do.

    Browkin II with |x|_p = 1, |conj x|_p < 1: h even. Browkin II* with
    v_p(x) < 0, v_p(conj x) = 0: h = 0 or odd. x = sqrt(D) under Browkin II: h = 1 or even.
    """

    if e.status is not Status.PERIODIC:
        raise ValueError("preperiod parity needs a periodic expansion")
    h = e.h or 0
    root = root_for(x, e.prime)
    vx = vp_quad(x, root)
    vc = vp_quad(conjugate(x), root)
    verdicts: List[bool] = []
    if e.algorithm is AlgorithmKind.BROWKIN_II:
        if vx == 0 and vc > 0:
            verdicts.append(h % 2 == 0)
        if _is_plain_sqrt(x):
            verdicts.append(h == 1 or h % 2 == 0)
    elif e.algorithm is AlgorithmKind.BROWKIN_II_STAR and vx < 0 and vc == 0:
        verdicts.append(h == 0 or h % 2 == 1)
    return all(verdicts)


def backward_step_blocked(e: Expansion) -> bool:
    """True when exactly one of b_{h-1}, b_{h+k-1} came from the sign-corrected t.

    That is what stops b_h = b_{h+k} from propagating to b_{h-1} = b_{h+k-1}
    for inputs meeting the pure-periodicity conditions.
    """

    if e.status is not Status.PERIODIC or not e.h:
        return False
    log = set(e.sign_branch_log)
    return ((e.h - 1) in log) != ((e.h + e.k - 1) in log)


def purely_periodic_tail(e: Expansion) -> Tuple[QuadInt, AlgorithmKind]:
    """alpha_h and the algorithm under which its expansion is the bare period.

    An odd h flips the s/t alternation, so Browkin II tails run under II* and
    the other way round.
    """

    if e.status is not Status.PERIODIC or e.witness is None:
        raise ValueError("tail needs a periodic expansion")
    kind = e.algorithm
    if (e.h or 0) % 2 and kind.alternating:
        kind = AlgorithmKind.BROWKIN_II_STAR if kind is AlgorithmKind.BROWKIN_II else AlgorithmKind.BROWKIN_II
    return e.witness.cq, kind


# ── Period-4 family ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class FamilyInstance:
    p: Prime
    t: int
    D: int
    branch: int
    expected_preperiod: Tuple[PartialQuotient, ...]
    expected_period: Tuple[PartialQuotient, ...]

    @property
    def expected_expansion(self) -> Tuple[PartialQuotient, ...]:
        return self.expected_preperiod + self.expected_period

    def mirrored(self) -> "FamilyInstance":
        return FamilyInstance(
            self.p, self.t, self.D, -self.branch, _negated(self.expected_preperiod), _negated(self.expected_period)
        )


def _negated(qs: Sequence[PartialQuotient]) -> Tuple[PartialQuotient, ...]:
    return tuple(PartialQuotient(q.prime, -q.numerator, q.p_exponent) for q in qs)


def period4_family(p: Prime, t: int, branch: int = 1) -> Optional[FamilyInstance]:
    """D = (1 - p^t)/(1 - p)^2 * p^2 and the period-4 expansion of +/- sqrt(D).

    Returns None when D is not an integer, i.e. (p - 1)^2 does not divide p^t - 1.
    """

    require_odd_prime(p)
    if t < 2:
        raise ValueError(f"t must be at least 2, got {t}")
    if (p ** t - 1) % (p - 1) ** 2:
        return None
    D = (1 - p ** t) // (p - 1) ** 2 * p * p
    x = Fraction(2 * (p ** (t - 1) - 1), (p - 1) * p ** (t - 1))
    instance = FamilyInstance(
        p=p,
        t=t,
        D=D,
        branch=1,
        expected_preperiod=_quotients(p, 0, Fraction(1, p)),
        expected_period=_quotients(p, -1, -x, -1, Fraction(2, p)),
    )
    return instance if branch == 1 else instance.mirrored()


def _quotients(p: Prime, *values: RationalLike) -> Tuple[PartialQuotient, ...]:
    return tuple(PartialQuotient.from_fraction(v, p) for v in values)


def family_instances(p: Prime, t_max: int) -> List[FamilyInstance]:
    return [inst for t in range(2, t_max + 1) if (inst := period4_family(p, t)) is not None]


def family_diff(inst: FamilyInstance, e: Expansion) -> List[str]:
    """Human-readable differences between an instance and an engine run."""

    diffs: List[str] = []
    if e.status is not Status.PERIODIC:
        diffs.append(f"status {e.status.value}, expected PERIODIC")
    if (e.h, e.k) != (2, 4):
        diffs.append(f"(h, k) = ({e.h}, {e.k}), expected (2, 4)")
    got = e.take(6)
    for i, (want, have) in enumerate(zip(inst.expected_expansion, got)):
        if want != have:
            diffs.append(f"b_{i}: got {have}, expected {want}")
    return diffs


def inadmissible_quotients(inst: FamilyInstance) -> List[str]:
    """Stated quotients no plain s-step (J_p) or t-step (K_p) could emit."""

    out: List[str] = []
    for i, b in enumerate(inst.expected_expansion):
        if (i % 2 == 0 and not b.in_j) or (i % 2 == 1 and not b.in_k):
            out.append(f"b_{i} = {b} outside {'J' if i % 2 == 0 else 'K'}_{inst.p}")
    return out


class FamilyVerdict(str, Enum):
    VERIFIED = "verified"
    # stated expansion has quotients outside J_p / K_p and the engine disagrees
    FLAGGED = "flagged"
    MISMATCH = "mismatch"


@dataclass(frozen=True)
class FamilyCheck:
    instance: FamilyInstance
    verdict: FamilyVerdict
    diffs: Tuple[str, ...] = ()

    def describe(self) -> str:
        inst = self.instance
        return f"p={inst.p} t={inst.t} D={inst.D} branch={inst.branch:+d}: {'; '.join(self.diffs)}"


def check_family(inst: FamilyInstance, max_steps: int = 1_000) -> FamilyCheck:
    """Expand +/- sqrt(D) under Browkin II and classify it against the stated expansion.

    A disagreement is FLAGGED when the stated expansion itself is inadmissible
    (for p = 3 the stated b_3 and b_5 have absolute value >= 1/2), and a
    MISMATCH otherwise.
    """

    x = QuadInt.of(0, 1, 1, inst.D, inst.branch)
    e = expand(x, AlgorithmKind.BROWKIN_II, inst.p, max_steps=max_steps)
    diffs = family_diff(inst, e)
    if not diffs:
        return FamilyCheck(inst, FamilyVerdict.VERIFIED)
    outside = inadmissible_quotients(inst)
    if outside:
        check = FamilyCheck(inst, FamilyVerdict.FLAGGED, tuple(outside + diffs))
        logger.warning("Family counterexample %s", check.describe())
    else:
        check = FamilyCheck(inst, FamilyVerdict.MISMATCH, tuple(diffs))
        logger.warning("Family mismatch %s", check.describe())
    return check


def verify_family(inst: FamilyInstance, max_steps: int = 1_000) -> bool:
    """True when the engine reproduces the stated expansion exactly."""

    return check_family(inst, max_steps).verdict is FamilyVerdict.VERIFIED


# ── Evidence scans ─────────────────────────────────────────────────────────────


def _blank(value: Any) -> Any:
    return "" if value is None else value


@dataclass(frozen=True)
class ScanRow:
    p: Prime
    D: int
    input: str
    algorithm: str
    status: str
    h: Optional[int]
    k: Optional[int]
    steps: int
    sign_branch_count: int
    parity_ok: Optional[bool]
    pure_ok: bool = True

    def as_csv(self) -> List[Any]:
        return [
            self.p,
            self.D,
            self.input,
            self.algorithm,
            self.status,
            _blank(self.h),
            _blank(self.k),
            self.steps,
            self.sign_branch_count,
            _blank(self.parity_ok),
        ]


@dataclass
class ScanTable:
    p: Prime
    algorithm: AlgorithmKind
    d_min: int
    d_max: int
    rows: List[ScanRow] = field(default_factory=list)

    def period_histogram(self) -> Dict[int, int]:
        counts = Counter(row.k for row in self.rows if row.status == Status.PERIODIC.value)
        return dict(sorted(counts.items()))

    def summary(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "algorithm": self.algorithm.value,
            "d_min": self.d_min,
            "d_max": self.d_max,
            "rows": len(self.rows),
            "status_counts": dict(sorted(Counter(row.status for row in self.rows).items())),
            "period_histogram": {str(k): v for k, v in self.period_histogram().items()},
            "parity_failures": sum(1 for row in self.rows if row.parity_ok is False),
            "pure_failures": sum(1 for row in self.rows if not row.pure_ok),
        }

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.as_csv())


def scan_input(D: int, p: Prime, kind: AlgorithmKind) -> QuadInt:
    """sqrt(D) for Browkin I/II; its first complete quotient 1/(sqrt(D) - s(sqrt(D))) for II*."""

    x = QuadInt.of(0, 1, 1, D)
    if kind is not AlgorithmKind.BROWKIN_II_STAR:
        return x
    first = step(x, 0, AlgorithmKind.BROWKIN_II, root_for(x, p))
    assert first.next is not None
    return first.next


def _squarefree_key(D: int, p: Prime) -> Tuple[int, int]:
    return squarefree_kernel(D), int(vp_int(D, p))


def scan_candidates(p: Prime, d_min: int, d_max: int, dedupe: bool = False) -> List[int]:
    out: List[int] = []
    keys = set()
    for D in range(d_min, d_max + 1):
        if D == 0 or _is_perfect_square(D) or not sqrt_exists(D, p):
            continue
        if dedupe:
            key = _squarefree_key(D, p)
            if key in keys:
                continue
            keys.add(key)
        out.append(D)
    return out


def _scan_one(args: Tuple[Prime, int, AlgorithmKind, int, int]) -> ScanRow:
    p, D, kind, max_steps, precision_cap = args
    x = scan_input(D, p, kind)
    e = expand(x, kind, p, max_steps=max_steps, precision_cap=precision_cap)
    parity: Optional[bool] = None
    pure_ok = True
    if e.status is Status.PERIODIC:
        parity = check_preperiod_parity(e, x)
        pure_ok = check_galois_necessary(x, e).implication_holds
    return ScanRow(
        p=p,
        D=D,
        input=str(x),
        algorithm=kind.value,
        status=e.status.value,
        h=e.h,
        k=e.k,
        steps=e.steps_used,
        sign_branch_count=len(e.sign_branch_log),
        parity_ok=parity,
        pure_ok=pure_ok,
    )


def conjecture_scan(
    p: Prime,
    d_min: int,
    d_max: int,
    kind: AlgorithmKind = AlgorithmKind.BROWKIN_II,
    max_steps: int = 20_000,
    jobs: int = 1,
    dedupe: bool = False,
    precision_cap: int = DEFAULT_PRECISION_CAP,
) -> ScanTable:
    """Expand the scan input for every admissible D in [d_min, d_max]; rows sorted by D."""

    require_odd_prime(p)
    if d_min > d_max:
        raise ValueError(f"d_min={d_min} must not exceed d_max={d_max}")
    kind = AlgorithmKind(kind)
    tasks = [(p, D, kind, max_steps, precision_cap) for D in scan_candidates(p, d_min, d_max, dedupe)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_one, tasks, chunksize=8))
    else:
        rows = [_scan_one(task) for task in tasks]
    rows.sort(key=lambda row: row.D)
    table = ScanTable(p, kind, d_min, d_max, rows)
    logger.info("Scanned %d radicands for p=%d (%s): %s", len(rows), p, kind.value, table.summary()["status_counts"])
    return table


# ── Verification suites ──────────────────────────────────────────────────────


@dataclass
class SuiteReport:
    name: str
    checked: int = 0
    failures: List[str] = field(default_factory=list)
    # counterexamples to a stated result, reported without failing the suite
    flagged: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, message: str) -> None:
        self.checked += 1
        if not ok:
            self.failures.append(message)


def expansion_consistent(e: Expansion) -> List[str]:
    """Engine self-checks on one run: parity law, convergent valuations, convergence, replay, round-trip."""

    problems: List[str] = []
    bs = e.take(min(len(e.quotients), 64)) if e.quotients else []
    if not parity_law_holds(e):
        problems.append("parity law")
    if bs:
        conv = convergents(bs)
        if not valuation_identities_hold(bs, conv, e.prime):
            problems.append("valuation identities")
        if not strictly_increasing(convergence_valuations(e.input, conv, root_for(e.input, e.prime))):
            problems.append("convergence")
    if e.status is Status.PERIODIC and not replay_period(e):
        problems.append("period replay")
    if e.status is not Status.CAPPED:
        try:
            reconstruct(e)
        except RuntimeError as exc:
            problems.append(f"reconstruct: {exc}")
    return problems


def verify_lemmas(primes: Sequence[Prime] = (3, 5, 7), pairs: int = 10_000, seed: int = 2022) -> SuiteReport:
    """Sampled J_p / K_p separation, |t| < 1/2 and the s/t valuation facts."""

    report = SuiteReport("lemmas")
    rng = random.Random(seed)
    for p in primes:
        for _ in range(pairs):
            a, b = sample_j(p, rng), sample_j(p, rng)
            if a != b:
                report.check(vp_rational(a.value - b.value, p) <= 0, f"J_{p}: v({a} - {b}) > 0")
            a, b = sample_k(p, rng), sample_k(p, rng)
            if a != b:
                report.check(vp_rational(a.value - b.value, p) < 0, f"K_{p}: v({a} - {b}) >= 0")

            x = Fraction(rng.randint(-10 ** 6, 10 ** 6), rng.randint(1, 10 ** 6) * p ** rng.randint(0, 4))
            if x == 0:
                continue
            v = int(vp_rational(x, p))
            approx = balanced_digits(x, p, min(v, 0), max(v, 0) + 8)
            t, s = t_floor(approx), s_floor(approx)
            report.check(2 * abs(t.value) < 1, f"|t({x})| >= 1/2 in Q_{p}")
            report.check(t.in_k or t.numerator == 0, f"t({x}) = {t} not in K_{p}")
            report.check(s.in_j, f"s({x}) = {s} not in J_{p}")
            report.check(vp_rational(x - s.value, p) >= 1, f"v({x} - s) < 1 in Q_{p}")
            report.check(vp_rational(x - t.value, p) >= 0, f"v({x} - t) < 0 in Q_{p}")
    return report


def verify_known_examples(report: Optional[SuiteReport] = None) -> SuiteReport:
    """Replay the two worked expansions and the Galois-type implications on them."""

    report = report or SuiteReport("galois")
    runs: Dict[str, Expansion] = {}
    for name, (x, p, kind, pre, per) in KNOWN_EXPANSIONS.items():
        e = runs[name] = expand(x, kind, p)
        report.check([str(b) for b in e.preperiod] == pre, f"{name}: preperiod {e.text()}")
        report.check([str(b) for b in (e.period or ())] == per, f"{name}: period {e.text()}")
        galois = check_galois_necessary(x, e)
        report.check(galois.conditions_met is True, f"{name}: valuation hypotheses fail")
        report.check(galois.converse_fails, f"{name}: expected a non-pure periodic expansion")
        report.check(check_preperiod_parity(e, x), f"{name}: preperiod parity h={e.h}")
        for problem in expansion_consistent(e):
            report.failures.append(f"{name}: {problem}")

        tail, tail_kind = purely_periodic_tail(e)
        pure = expand(tail, tail_kind, p)
        report.check(pure.status is Status.PERIODIC and pure.h == 0, f"{name}: tail not purely periodic")
        report.check(check_galois_necessary(tail, pure).implication_holds, f"{name}: tail violates Galois conditions")

    e = runs["sqrt30_plus_3"]
    report.check(list(e.sign_branch_log) == [13], f"sign branch indices {list(e.sign_branch_log)}, expected [13]")
    report.check(backward_step_blocked(e), "backward step not blocked at h - 1 = 3")
    return report


def verify_parity_scan(
    primes: Sequence[Prime] = (5, 7), d_max: int = 2_000, max_steps: int = 2_000, jobs: int = 1
) -> SuiteReport:
    report = SuiteReport("parity")
    for p in primes:
        table = conjecture_scan(p, 2, d_max, AlgorithmKind.BROWKIN_II, max_steps=max_steps, jobs=jobs)
        for row in table.rows:
            if row.status == Status.PERIODIC.value:
                report.check(bool(row.parity_ok), f"p={p} D={row.D}: preperiod h={row.h} neither 1 nor even")
                report.check(row.pure_ok, f"p={p} D={row.D}: purely periodic without Galois conditions")
    return report


def verify_family_suite(primes: Sequence[Prime] = (3, 5, 7, 11, 13), t_max: int = 12) -> SuiteReport:
    report = SuiteReport("family")
    for p in primes:
        for inst in family_instances(p, t_max):
            for variant in (inst, inst.mirrored()):
                check = check_family(variant)
                if check.verdict is FamilyVerdict.FLAGGED:
                    report.checked += 1
                    report.flagged.append(check.describe())
                else:
                    report.check(check.verdict is FamilyVerdict.VERIFIED, check.describe())
    return report


def run_suite(name: str, settings: Optional[Settings] = None) -> SuiteReport:
    """Run one named suite (see SUITES)."""

    settings = settings or Settings()
    if name == "lemmas":
        return verify_lemmas()
    if name == "galois":
        return verify_known_examples()
    if name == "parity":
        return verify_parity_scan(max_steps=settings.verify_max_steps, jobs=settings.jobs)
    if name == "family":
        return verify_family_suite()
    if name == "oracle":
        from utils.oracle import oracle_agreement

        return oracle_agreement(
            count=500,
            steps=50,
            seed=2022,
            width=settings.oracle_width,
            guard=settings.oracle_guard,
            retries=settings.oracle_retries,
        )
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")

