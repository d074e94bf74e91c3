"""Command-line entry point for the p-adic continued fraction engine.

Run with:
    python app/main.py expand -p 7 -a browkin2 "(3+1*sqrt(30))/1"
    python app/main.py family -p 5 --t-max 20
    python app/main.py scan -p 7 --d-min 2 --d-max 500 -a browkin2
    python app/main.py verify all

Exit codes: 0 ok, 1 input error or failed check, 2 CAPPED expansion,
3 root precision cap exceeded.
"""

from __future__ import annotations

from dotenv import dotenv_values, load_dotenv
from pathlib import Path
load_dotenv(dotenv_path=Path(__file__).resolve().parents[1] / ".env")

from typing import Any, Dict, List, Optional, Sequence
import argparse
import csv
import json
import logging
import sys

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from utils.cf_engine import AlgorithmKind, Expansion, Status, convergents, expand
from utils.config import Settings, load_settings
from utils.padic_core import require_odd_prime
from utils.quad_field import PrecisionCapError, parse_quad
from utils.theory import SUITES, FamilyVerdict, check_family, conjecture_scan, family_instances, run_suite

logger = logging.getLogger("padic_cf")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CAPPED = 2
EXIT_PRECISION = 3

BRANCHES = {"plus": 1, "minus": -1}
FORMATS = ("json", "csv", "text")
# Keys a --config file may set, by argparse destination
FAMILY_COLUMNS = ["p", "t", "D", "branch", "expansion", "verdict", "diff"]
CONFIG_KEYS = ("prime", "algorithm", "max_steps", "precision_cap", "branch", "format", "jobs", "d_min", "d_max", "t_max")


class InputError(ValueError):
    """Bad flag, config value or input string."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the input-error code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ── Parser ───────────────────────────────────────────────────────────────────
def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="padic-cf", description="p-adic continued fractions (Browkin I, II, II*).")
    parser.add_argument("--config", type=Path, default=None, help="dotenv-style file of flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    algorithms = [kind.value for kind in AlgorithmKind]

    p_expand = sub.add_parser("expand", help="expand one rational or quadratic irrational")
    p_expand.add_argument("input", help='"a/c" or "(a+b*sqrt(D))/c"')
    p_expand.add_argument("-p", "--prime", type=int)
    p_expand.add_argument("-a", "--algorithm", choices=algorithms)
    p_expand.add_argument("--max-steps", type=int)
    p_expand.add_argument("--precision-cap", type=int)
    p_expand.add_argument("--branch", choices=sorted(BRANCHES))
    p_expand.add_argument("--format", choices=FORMATS)
    p_expand.add_argument("--convergents", action="store_true", help="include A_n/B_n in JSON output")

    p_family = sub.add_parser("family", help="period-4 family of square roots")
    p_family.add_argument("-p", "--prime", type=int)
    p_family.add_argument("--t-max", type=int)
    p_family.add_argument("--format", choices=FORMATS)

    p_scan = sub.add_parser("scan", help="expand sqrt(D) over a range of D")
    p_scan.add_argument("-p", "--prime", type=int)
    p_scan.add_argument("-a", "--algorithm", choices=algorithms)
    p_scan.add_argument("--d-min", type=int)
    p_scan.add_argument("--d-max", type=int)
    p_scan.add_argument("--max-steps", type=int)
    p_scan.add_argument("--precision-cap", type=int)
    p_scan.add_argument("--jobs", type=int)
    p_scan.add_argument("--dedupe", action="store_true", help="one D per (squarefree kernel, v_p(D))")
    p_scan.add_argument("--summary", type=Path, default=None, help="write the JSON summary here")

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=SUITES + ("all",))
    return parser


def _merge_config(args: argparse.Namespace) -> None:
    """Fill unset flags from --config; flags win."""

    if args.config is None:
        return
    if not args.config.is_file():
        raise InputError(f"config file {args.config} not found")
    values = dotenv_values(args.config)
    for key in CONFIG_KEYS:
        if not hasattr(args, key) or getattr(args, key) is not None:
            continue
        raw = values.get(key.upper())
        if raw is None or not raw.strip():
            continue
        raw = raw.strip()
        if key in ("algorithm", "branch", "format"):
            setattr(args, key, raw)
        else:
            try:
                setattr(args, key, int(raw))
            except ValueError as exc:
                raise InputError(f"config {key.upper()} must be an integer, got {raw!r}") from exc


def _require(args: argparse.Namespace, name: str, default: Any = None) -> Any:
    value = getattr(args, name, None)
    if value is None:
        value = default
    if value is None:
        raise InputError(f"--{name.replace('_', '-')} is required")
    return value


def _prime(args: argparse.Namespace) -> int:
    try:
        return require_odd_prime(_require(args, "prime"))
    except ValueError as exc:
        raise InputError(f"--prime: {exc}") from exc


def _choice(value: str, allowed: Sequence[str], name: str) -> str:
    if value not in allowed:
        raise InputError(f"--{name} must be one of {', '.join(allowed)}, got {value!r}")
    return value


# ── Output ───────────────────────────────────────────────────────────────────
def _expansion_payload(e: Expansion, with_convergents: bool) -> Dict[str, Any]:
    payload = e.to_dict()
    if with_convergents and e.quotients:
        conv = convergents(e.quotients)
        payload["convergents"] = [
            "inf" if conv.ratio(n) is None else str(conv.ratio(n)) for n in range(len(conv.A))
        ]
    return payload


def _csv_cell(value: Any) -> Any:
    if isinstance(value, list):
        return " ".join(str(v) for v in value)
    return "" if value is None else value


def _write_expansion(e: Expansion, fmt: str, with_convergents: bool) -> None:
    if fmt == "json":
        print(json.dumps(_expansion_payload(e, with_convergents)))
    elif fmt == "text":
        print(f"{e.input} in Q_{e.prime} ({e.algorithm.value}): {e.text()}")
        print(f"status={e.status.value} h={e.h} k={e.k} steps={e.steps_used}")
    else:
        payload = e.to_dict()
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(list(payload))
        writer.writerow([_csv_cell(value) for value in payload.values()])


# ── Commands ─────────────────────────────────────────────────────────────────
def cmd_expand(args: argparse.Namespace, settings: Settings) -> int:
    p = _prime(args)
    kind = AlgorithmKind(_choice(_require(args, "algorithm"), [k.value for k in AlgorithmKind], "algorithm"))
    branch = BRANCHES[_choice(_require(args, "branch", "plus"), sorted(BRANCHES), "branch")]
    fmt = _choice(_require(args, "format", "json"), FORMATS, "format")
    try:
        x = parse_quad(args.input, branch)
    except ValueError as exc:
        raise InputError(str(exc)) from exc

    try:
        e = expand(
            x,
            kind,
            p,
            max_steps=_require(args, "max_steps", settings.max_steps),
            initial_precision=settings.initial_precision,
            precision_cap=_require(args, "precision_cap", settings.precision_cap),
        )
    except PrecisionCapError as exc:
        logger.error("%s", exc)
        return EXIT_PRECISION
    except ValueError as exc:
        raise InputError(str(exc)) from exc

    _write_expansion(e, fmt, args.convergents)
    return EXIT_CAPPED if e.status is Status.CAPPED else EXIT_OK


def cmd_family(args: argparse.Namespace, settings: Settings) -> int:
    p = _prime(args)
    t_max = _require(args, "t_max", 12)
    fmt = _choice(_require(args, "format", "csv"), FORMATS, "format")
    rows: List[Dict[str, Any]] = []
    for inst in family_instances(p, t_max):
        for variant in (inst, inst.mirrored()):
            check = check_family(variant, max_steps=settings.verify_max_steps)
            rows.append(
                {
                    "p": p,
                    "t": variant.t,
                    "D": variant.D,
                    "branch": "plus" if variant.branch == 1 else "minus",
                    "expansion": "[" + ", ".join(str(b) for b in variant.expected_preperiod)
                    + ", overline(" + ", ".join(str(b) for b in variant.expected_period) + ")]",
                    "verdict": check.verdict.value,
                    "diff": "; ".join(check.diffs),
                }
            )

    if fmt == "json":
        print(json.dumps(rows))
    elif fmt == "text":
        for row in rows:
            line = f"t={row['t']} D={row['D']} sqrt {row['branch']}: {row['expansion']} {row['verdict']}"
            print(f"{line} ({row['diff']})" if row["diff"] else line)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=FAMILY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    # flagged rows are counterexamples to the stated expansion, not engine failures
    mismatched = any(row["verdict"] == FamilyVerdict.MISMATCH.value for row in rows)
    return EXIT_INPUT if mismatched else EXIT_OK


def cmd_scan(args: argparse.Namespace, settings: Settings) -> int:
    p = _prime(args)
    kind = AlgorithmKind(
        _choice(_require(args, "algorithm", AlgorithmKind.BROWKIN_II.value), [k.value for k in AlgorithmKind],
                "algorithm")
    )
    d_min, d_max = _require(args, "d_min"), _require(args, "d_max")
    try:
        table = conjecture_scan(
            p,
            d_min,
            d_max,
            kind,
            max_steps=_require(args, "max_steps", settings.max_steps),
            jobs=_require(args, "jobs", settings.jobs),
            dedupe=args.dedupe,
            precision_cap=_require(args, "precision_cap", settings.precision_cap),
        )
    except PrecisionCapError as exc:
        logger.error("%s", exc)
        return EXIT_PRECISION
    except ValueError as exc:
        raise InputError(str(exc)) from exc

    table.write_csv(sys.stdout)
    summary = json.dumps(table.summary())
    if args.summary is not None:
        args.summary.write_text(summary + "\n", encoding="utf-8")
    else:
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in names:
        report = run_suite(name, settings)
        verdict = "PASS" if report.passed else "FAIL"
        line = f"{report.name}: {verdict} ({report.checked} checks, {len(report.failures)} failures"
        print(line + (f", {len(report.flagged)} flagged)" if report.flagged else ")"))
        for failure in report.failures[:20]:
            print(f"  - {failure}")
        for flagged in report.flagged[:20]:
            print(f"  ! {flagged}")
        ok = ok and report.passed
    return EXIT_OK if ok else EXIT_INPUT


COMMANDS = {"expand": cmd_expand, "family": cmd_family, "scan": cmd_scan, "verify": cmd_verify}


# ── Entry point ─────────────────────────────────────────────────────────────────
def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = load_settings()
    except RuntimeError as exc:
        print(f"padic-cf: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        _merge_config(args)
        return COMMANDS[args.command](args, settings)
    except InputError as exc:
        print(f"padic-cf {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        logger.exception("Unexpected failure in %s", args.command)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
