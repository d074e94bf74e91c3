from dotenv import load_dotenv
load_dotenv()

import io
import logging

import pytest

from utils.cf_engine import AlgorithmKind, Status, expand
from utils.quad_field import QuadInt
from utils.theory import (
    CSV_HEADER,
    FamilyInstance,
    FamilyVerdict,
    backward_step_blocked,
    check_family,
    check_galois_necessary,
    check_preperiod_parity,
    check_pure_candidate_sqrt,
    conjecture_scan,
    family_diff,
    family_instances,
    inadmissible_quotients,
    period4_family,
    purely_periodic_tail,
    run_suite,
    scan_input,
    verify_family,
    verify_family_suite,
    verify_known_examples,
    verify_lemmas,
)

SQRT30_PLUS_3 = QuadInt.of(3, 1, 1, 30)
SQRT79_OVER_75 = QuadInt.of(2, 1, 75, 79)


@pytest.fixture(scope="module")
def q7_run():
    return expand(SQRT30_PLUS_3, AlgorithmKind.BROWKIN_II, 7)


@pytest.fixture(scope="module")
def q5_run():
    return expand(SQRT79_OVER_75, AlgorithmKind.BROWKIN_II_STAR, 5)


def test_converse_fails_for_sqrt30(q7_run):
    report = check_galois_necessary(SQRT30_PLUS_3, q7_run)
    assert report.alpha_valuation == 0
    assert report.conj_valuation > 0
    assert report.conditions_met is True
    assert not report.pure_periodic
    assert report.converse_fails
    assert report.implication_holds


def test_star_example_valuations(q5_run):
    report = check_galois_necessary(SQRT79_OVER_75, q5_run)
    assert (report.alpha_valuation, report.conj_valuation) == (-2, 0)
    assert report.conditions_met is True
    assert report.converse_fails
    assert check_preperiod_parity(q5_run, SQRT79_OVER_75)


def test_browkin_i_has_no_condition():
    e = expand(SQRT30_PLUS_3, AlgorithmKind.BROWKIN_I, 7, max_steps=200)
    report = check_galois_necessary(SQRT30_PLUS_3, e)
    assert report.conditions_met is None
    assert report.implication_holds


def test_backward_step_blocked(q7_run, q5_run):
    assert backward_step_blocked(q7_run)
    assert backward_step_blocked(q5_run)
    assert check_preperiod_parity(q7_run, SQRT30_PLUS_3)


def test_tails_are_purely_periodic(q7_run, q5_run):
    for e, p in ((q7_run, 7), (q5_run, 5)):
        tail, kind = purely_periodic_tail(e)
        pure = expand(tail, kind, p)
        assert pure.status is Status.PERIODIC
        assert pure.h == 0
        assert pure.period == e.period
        assert check_galois_necessary(tail, pure).conditions_met is True
    assert purely_periodic_tail(q5_run)[1] is AlgorithmKind.BROWKIN_II


def test_pure_candidate_sqrt():
    assert check_pure_candidate_sqrt(3, 30, 7)
    assert check_pure_candidate_sqrt(10, 30, 7)
    assert not check_pure_candidate_sqrt(-3, 30, 7)
    assert not check_pure_candidate_sqrt(0, 30, 7)
    assert check_pure_candidate_sqrt(2, 79, 5)
    with pytest.raises(ValueError):
        check_pure_candidate_sqrt(1, -975, 5)


def test_parity_needs_periodic():
    e = expand(SQRT30_PLUS_3, AlgorithmKind.BROWKIN_II, 7, max_steps=3)
    with pytest.raises(ValueError):
        check_preperiod_parity(e, SQRT30_PLUS_3)


def test_family_instances():
    assert [inst.t for inst in family_instances(5, 20)] == [4, 8, 12, 16, 20]
    assert [inst.t for inst in family_instances(3, 10)] == [2, 4, 6, 8, 10]
    assert [inst.t for inst in family_instances(7, 12)] == [6, 12]
    assert family_instances(5, 3) == []
    assert period4_family(5, 5) is None


def test_family_p5_t4():
    inst = period4_family(5, 4)
    assert inst.D == -975
    assert [str(b) for b in inst.expected_expansion] == ["0", "1/5", "-1", "-62/125", "-1", "2/5"]
    minus = period4_family(5, 4, branch=-1)
    assert minus.branch == -1
    assert [str(b) for b in minus.expected_expansion] == ["0", "-1/5", "1", "62/125", "1", "-2/5"]
    assert verify_family(inst)
    assert verify_family(minus)


@pytest.mark.parametrize("p", [5, 7, 11, 13])
def test_family_verifies(p):
    for inst in family_instances(p, 12):
        assert inadmissible_quotients(inst) == []
        assert verify_family(inst), inst
        assert verify_family(inst.mirrored()), inst


def test_family_p3_is_flagged():
    inst = period4_family(3, 2)
    assert inst.D == -18
    # |b_3| and |b_5| are at least 1/2, out of reach of a plain t-step
    assert inadmissible_quotients(inst) == ["b_3 = -2/3 outside K_3", "b_5 = 2/3 outside K_3"]

    e = expand(QuadInt.of(0, 1, 1, -18), AlgorithmKind.BROWKIN_II, 3)
    assert (e.h, e.k) == (2, 8)
    assert [str(b) for b in e.take(10)] == ["0", "1/3", "-1", "1/3", "1", "-8/9", "1", "1/3", "-1", "2/3"]

    check = check_family(inst)
    assert check.verdict is FamilyVerdict.FLAGGED
    assert "b_3: got 1/3, expected -2/3" in check.diffs
    assert "(h, k) = (2, 8), expected (2, 4)" in check.diffs
    assert check_family(inst.mirrored()).verdict is FamilyVerdict.FLAGGED
    assert not verify_family(inst)


def test_family_suite_keeps_flagged_apart():
    report = verify_family_suite(primes=(3, 5), t_max=8)
    assert report.passed, report.failures
    assert report.checked == 12
    # p=3: t = 2, 4, 6, 8 on both branches
    assert len(report.flagged) == 8
    assert all(line.startswith("p=3 ") for line in report.flagged)


def test_family_mismatch_is_reported(caplog):
    inst = period4_family(5, 4)
    wrong = period4_family(5, 8)
    e = expand(QuadInt.of(0, 1, 1, wrong.D), AlgorithmKind.BROWKIN_II, 5)
    assert family_diff(inst, e) == ["b_3: got -39062/78125, expected -62/125"]
    forged = FamilyInstance(5, 4, wrong.D, 1, inst.expected_preperiod, inst.expected_period)
    with caplog.at_level(logging.WARNING, logger="utils.theory"):
        assert check_family(forged).verdict is FamilyVerdict.MISMATCH
    assert "Family mismatch" in caplog.text


def test_scan_rows():
    table = conjecture_scan(7, 2, 120, AlgorithmKind.BROWKIN_II, max_steps=500)
    ds = [row.D for row in table.rows]
    assert ds == sorted(ds)
    assert 30 in ds and 3 not in ds and 4 not in ds
    summary = table.summary()
    assert summary["rows"] == len(table.rows)
    assert summary["parity_failures"] == 0
    assert summary["pure_failures"] == 0

    buffer = io.StringIO()
    table.write_csv(buffer)
    lines = buffer.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == len(table.rows) + 1


def test_scan_finds_family_member():
    table = conjecture_scan(5, -980, -970, max_steps=200)
    row = next(row for row in table.rows if row.D == -975)
    assert (row.status, row.h, row.k) == ("PERIODIC", 2, 4)
    assert row.parity_ok is True


def test_scan_empty_and_bad_range():
    buffer = io.StringIO()
    table = conjecture_scan(7, 9, 9)
    table.write_csv(buffer)
    assert buffer.getvalue() == ",".join(CSV_HEADER) + "\n"
    with pytest.raises(ValueError):
        conjecture_scan(7, 10, 2)


def test_scan_parallel_matches_serial():
    serial = conjecture_scan(7, 2, 120, max_steps=500, jobs=1)
    parallel = conjecture_scan(7, 2, 120, max_steps=500, jobs=2)
    assert parallel.rows == serial.rows
    assert [row.D for row in parallel.rows] == sorted(row.D for row in parallel.rows)


def test_scan_dedupe():
    full = conjecture_scan(7, 2, 60, max_steps=300)
    deduped = conjecture_scan(7, 2, 60, max_steps=300, dedupe=True)
    assert {row.D for row in deduped.rows} <= {row.D for row in full.rows}
    # 8 = 4 * 2 shares its kernel with 2
    assert 2 in {row.D for row in deduped.rows}
    assert 8 not in {row.D for row in deduped.rows}


def test_star_scan_input():
    x = scan_input(30, 7, AlgorithmKind.BROWKIN_II_STAR)
    assert x == QuadInt.of(3, 1, 21, 30)
    table = conjecture_scan(7, 28, 32, AlgorithmKind.BROWKIN_II_STAR, max_steps=500)
    assert all(row.parity_ok is not False for row in table.rows)
    assert table.summary()["parity_failures"] == 0


@pytest.mark.parametrize("D", [29, 32])
def test_star_parity_accepts_purely_periodic(D):
    x = scan_input(D, 7, AlgorithmKind.BROWKIN_II_STAR)
    e = expand(x, AlgorithmKind.BROWKIN_II_STAR, 7, max_steps=500)
    assert e.status is Status.PERIODIC
    assert e.h == 0
    assert check_preperiod_parity(e, x)


def test_lemma_suite():
    report = verify_lemmas(pairs=300)
    assert report.passed, report.failures
    assert report.checked > 0


def test_known_examples_suite():
    report = verify_known_examples()
    assert report.passed, report.failures


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("nope")
