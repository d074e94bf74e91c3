from dotenv import load_dotenv
load_dotenv()

import json

import pytest

from app.main import main
from utils.theory import CSV_HEADER


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_expand_browkin_ii_example(capsys):
    code, out = _run(capsys, "expand", "-p", "7", "-a", "browkin2", "(3+1*sqrt(30))/1")
    assert code == 0
    payload = json.loads(out.out)
    assert (payload["h"], payload["k"]) == (4, 10)
    assert payload["preperiod"] == ["-1", "3/7", "3", "2/7"]
    assert payload["sign_branch_indices"] == [13]


def test_expand_rational(capsys):
    code, out = _run(capsys, "expand", "-p", "7", "-a", "browkin2", "22/7")
    assert code == 0
    assert json.loads(out.out)["status"] == "FINITE"


def test_expand_star_example(capsys):
    code, out = _run(capsys, "expand", "-p", "5", "-a", "browkin2star", "(2+1*sqrt(79))/75")
    assert code == 0
    payload = json.loads(out.out)
    assert (payload["h"], payload["k"]) == (15, 8)
    assert payload["period"] == ["1", "-7/25", "-1", "1/5", "2", "9/25", "-1", "-3/5"]


def test_expand_minus_branch_text(capsys):
    code, out = _run(
        capsys, "expand", "-p", "5", "-a", "browkin2", "--branch", "minus", "--format", "text", "(0+1*sqrt(-975))/1"
    )
    assert code == 0
    assert "[0, -1/5, overline(1, 62/125, 1, -2/5)]" in out.out


def test_expand_convergents(capsys):
    code, out = _run(capsys, "expand", "-p", "7", "-a", "browkin2", "--convergents", "22/7")
    assert code == 0
    assert json.loads(out.out)["convergents"] == ["22/7"]


def test_expand_csv(capsys):
    code, out = _run(capsys, "expand", "-p", "7", "-a", "browkin2", "--format", "csv", "22/7")
    assert code == 0
    header, row = out.out.splitlines()
    assert header.startswith("p,algorithm,input,status")
    assert row.startswith("7,browkin2,22/7,FINITE")


def test_expand_capped(capsys):
    code, out = _run(capsys, "expand", "-p", "7", "-a", "browkin2", "--max-steps", "3", "(3+1*sqrt(30))/1")
    assert code == 2
    assert json.loads(out.out)["status"] == "CAPPED"


def test_expand_precision_cap(capsys):
    code, out = _run(capsys, "expand", "-p", "7", "-a", "browkin2", "--precision-cap", "1", "(3+1*sqrt(30))/1")
    assert code == 3
    assert out.out == ""


@pytest.mark.parametrize(
    "argv",
    [
        ["expand", "-p", "7", "-a", "browkin2", "3+sqrt(30)"],
        ["expand", "-p", "2", "-a", "browkin2", "22/7"],
        ["expand", "-p", "9", "-a", "browkin2", "22/7"],
        ["expand", "-p", "7", "-a", "browkin2", "(1+1*sqrt(3))/1"],
        ["expand", "-p", "7", "-a", "browkin2star", "(3+1*sqrt(30))/1"],
        ["expand", "-p", "7", "22/7"],
        ["expand", "-p", "7", "-a", "browkin3", "22/7"],
        ["verify", "nope"],
        ["frobnicate"],
        [],
    ],
)
def test_input_errors(capsys, argv):
    code, out = _run(capsys, *argv)
    assert code == 1
    assert out.err


def test_family_p5(capsys):
    code, out = _run(capsys, "family", "-p", "5", "--t-max", "20")
    assert code == 0
    lines = out.out.splitlines()
    assert lines[0] == "p,t,D,branch,expansion,verdict,diff"
    rows = lines[1:]
    assert len(rows) == 10
    assert sorted({int(row.split(",")[1]) for row in rows}) == [4, 8, 12, 16, 20]
    assert all(row.endswith(",verified,") for row in rows)


def test_family_empty(capsys):
    code, out = _run(capsys, "family", "-p", "5", "--t-max", "3")
    assert code == 0
    assert out.out.splitlines() == ["p,t,D,branch,expansion,verdict,diff"]


def test_family_p3_json(capsys):
    code, out = _run(capsys, "family", "-p", "3", "--t-max", "10", "--format", "json")
    assert code == 0
    rows = json.loads(out.out)
    assert sorted({row["t"] for row in rows}) == [2, 4, 6, 8, 10]
    # the stated expansion is inadmissible for p=3; flagged rows do not fail the command
    assert {row["verdict"] for row in rows} == {"flagged"}
    first = next(row for row in rows if row["t"] == 2 and row["branch"] == "plus")
    assert "b_3: got 1/3, expected -2/3" in first["diff"]


def test_scan_with_summary(capsys, tmp_path):
    summary_path = tmp_path / "summary.json"
    code, out = _run(
        capsys, "scan", "-p", "7", "--d-min", "2", "--d-max", "80", "-a", "browkin2", "--max-steps", "500",
        "--summary", str(summary_path),
    )
    assert code == 0
    lines = out.out.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert all(not line.endswith(",False") for line in lines[1:])
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    assert summary["rows"] == len(lines) - 1
    assert summary["parity_failures"] == 0


def test_scan_empty_range(capsys):
    code, out = _run(capsys, "scan", "-p", "7", "--d-min", "9", "--d-max", "9")
    assert code == 0
    assert out.out == ",".join(CSV_HEADER) + "\n"
    assert json.loads(out.err.strip().splitlines()[-1])["rows"] == 0


def test_scan_precision_cap(capsys):
    code, out = _run(capsys, "scan", "-p", "7", "--d-min", "29", "--d-max", "30", "--precision-cap", "1")
    assert code == 3
    assert out.out == ""


def test_scan_bad_range(capsys):
    code, _ = _run(capsys, "scan", "-p", "7", "--d-min", "10", "--d-max", "2")
    assert code == 1


def test_verify_galois(capsys):
    code, out = _run(capsys, "verify", "galois")
    assert code == 0
    assert out.out.startswith("galois: PASS")


def test_config_file(capsys, tmp_path):
    config = tmp_path / "run.env"
    config.write_text("PRIME=7\nALGORITHM=browkin2\nFORMAT=text\n", encoding="utf-8")
    code, out = _run(capsys, "--config", str(config), "expand", "22/7")
    assert code == 0
    assert out.out.startswith("22/7 in Q_7 (browkin2): [22/7]")

    # flags win over the file
    code, out = _run(capsys, "--config", str(config), "expand", "--format", "json", "22/7")
    assert json.loads(out.out)["status"] == "FINITE"


def test_missing_config_file(capsys, tmp_path):
    code, out = _run(capsys, "--config", str(tmp_path / "absent.env"), "expand", "22/7")
    assert code == 1
    assert "not found" in out.err
