from dotenv import load_dotenv
load_dotenv()

import random
from fractions import Fraction

import pytest

from utils.cf_engine import AlgorithmKind, expand
from utils.oracle import (
    OracleCase,
    PrecisionFault,
    StreamState,
    engine_prefix,
    lift_sqrt,
    oracle_agreement,
    oracle_expand,
    oracle_expand_with_retry,
    random_quadratic_inputs,
    stream_of,
)
from utils.quad_field import QuadInt

Q7_LISTED = ["-1", "3/7", "3", "2/7", "1", "2/7", "-2", "3/7", "1", "2/7", "2", "1/7", "-1", "-5/7"]


def test_lift_sqrt():
    r = lift_sqrt(30, 7, 12)
    assert (r * r - 30) % 7 ** 12 == 0
    assert r % 7 == 3
    assert (lift_sqrt(30, 7, 12, branch=-1) + r) % 7 ** 12 == 0
    with pytest.raises(ValueError):
        lift_sqrt(3, 7, 4)


def test_example_quotients():
    quotients = oracle_expand((3, 1, 1, 30), 7, AlgorithmKind.BROWKIN_II, 14, 256)
    assert quotients == [Fraction(q) for q in Q7_LISTED]


def test_star_example_prefix():
    quotients = oracle_expand((2, 1, 75, 79), 5, AlgorithmKind.BROWKIN_II_STAR, 23, 256)
    e = expand(QuadInt.of(2, 1, 75, 79), AlgorithmKind.BROWKIN_II_STAR, 5)
    assert quotients == [q.value for q in e.quotients]


def test_rational_terminates_with_engine():
    rng = random.Random(11)
    for p in (3, 5, 7):
        for kind in (AlgorithmKind.BROWKIN_I, AlgorithmKind.BROWKIN_II):
            for _ in range(50):
                num, den = rng.randint(-10 ** 4, 10 ** 4), rng.randint(1, 10 ** 4)
                e = expand(QuadInt.rational(Fraction(num, den)), kind, p)
                quotients = oracle_expand((num, 0, den, 0), p, kind, 500, 256)
                assert quotients == [q.value for q in e.quotients]


def test_zero_input():
    assert oracle_expand((0, 0, 1, 0), 5, AlgorithmKind.BROWKIN_I, 5, 64) == [Fraction(0)]


def test_guard_margin():
    with pytest.raises(PrecisionFault):
        StreamState(7, 0, 1, 4)
    with pytest.raises(ValueError):
        StreamState(7, 0, 1, 64, guard=4)
    window = stream_of((3, 1, 1, 30), 7, 16)
    with pytest.raises(PrecisionFault):
        window.digits(10)


def test_retry_gives_up():
    outcome = oracle_expand_with_retry((3, 1, 1, 30), 7, AlgorithmKind.BROWKIN_II, 50, width=8, retries=0)
    assert outcome.inconclusive
    assert outcome.quotients == ()


def test_retry_widens():
    outcome = oracle_expand_with_retry((3, 1, 1, 30), 7, AlgorithmKind.BROWKIN_II, 60, width=16, retries=6)
    assert not outcome.inconclusive
    assert outcome.width > 16
    assert outcome.quotients[:14] == tuple(Fraction(q) for q in Q7_LISTED)


def test_random_inputs_are_valid():
    cases = random_quadratic_inputs(60, seed=5)
    assert len(cases) == 60
    assert cases == random_quadratic_inputs(60, seed=5)
    for case in cases:
        a, b, c, D = case.x
        x = QuadInt.of(a, b, c, D, case.branch)
        # Browkin II* inputs have v_p(x) < 0, so expand accepts every case
        expand(x, case.kind, case.p, max_steps=1)


def test_engine_prefix_extends_period():
    case = OracleCase(7, AlgorithmKind.BROWKIN_II, (3, 1, 1, 30))
    prefix = engine_prefix(case, 30)
    assert len(prefix) == 30
    assert prefix[14:24] == prefix[4:14]


def test_agreement_small_corpus():
    report = oracle_agreement(count=40, steps=30, seed=3)
    assert report.passed, report.failures
    assert report.checked > 30
