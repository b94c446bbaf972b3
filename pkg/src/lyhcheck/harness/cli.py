"""Command line: run, refine, list-cases, validate.

Exit status is 0 when every verdict is pass or pass-with-flags, 1 when
any check fails and 2 on configuration or solver errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..model import CATALOG
from .config import ConfigError, parse_config
from .emit import FORMATS, emit, render
from .runner import refinement_study, run_scenario

SUFFIX = {"json": ".json", "csv": ".csv", "plotdata": ".dat"}


def _flag_summary(bundle) -> None:
    flagged = {}
    for c in bundle.checks:
        for name in c.flagged:
            flagged.setdefault((c.name, name), 0)
            flagged[(c.name, name)] += 1
    for (check, name), count in sorted(flagged.items()):
        print(f"flag: {check}: {name} ({count} report{'s' if count > 1 else ''})", file=sys.stderr)
    if bundle.abort:
        print(f"abort: {bundle.abort['message']}", file=sys.stderr)
    for err in bundle.errors:
        print(f"error: {err['check']}: {err['message']}", file=sys.stderr)


def _summary_lines(bundle) -> list[str]:
    rows = {}
    for c in bundle.checks:
        r = rows.setdefault(c.name, {"n": 0, "worst": float("inf"), "verdicts": set()})
        r["n"] += 1
        r["worst"] = min(r["worst"], c.min_margin)
        r["verdicts"].add(c.verdict)
    out = []
    for name, r in rows.items():
        verdict = "fail" if "fail" in r["verdicts"] else (
            "pass-with-flags" if "pass-with-flags" in r["verdicts"] else "pass")
        out.append(f"{name:18s} reports={r['n']:4d}  min margin={r['worst']:+.6e}  {verdict}")
    return out


def _load(path):
    try:
        return parse_config(path)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"{path}: {line}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    sc = _load(args.config)
    if sc is None:
        return 2
    bundle = run_scenario(sc)
    _output(bundle, args)
    return bundle.exit_code


def cmd_refine(args) -> int:
    sc = _load(args.config)
    if sc is None:
        return 2
    try:
        bundle = refinement_study(sc, args.levels)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    conv = bundle.convergence or {}
    for name, margins in conv.get("min_margin", {}).items():
        shrink = conv["negative_margins_shrink"][name]
        print(f"{name:18s} " + "  ".join(f"{m:+.4e}" for m in margins) + ("" if shrink else "  NOT SHRINKING"))
    if "w_final_self" in conv:
        errs, orders = conv["w_final_self"]["errors"], conv["w_final_self"]["orders"]
        print("w(T) self-differences " + "  ".join(f"{e:.3e}" for e in errs))
        if orders:
            print("orders " + "  ".join(o if isinstance(o, str) else f"{o:.2f}" for o in orders))
    _output(bundle, args, table=False)
    if bundle.exit_code == 0 and not all(conv.get("negative_margins_shrink", {}).values()):
        return 1
    return bundle.exit_code


def _output(bundle, args, table=True) -> None:
    if table:
        for line in _summary_lines(bundle):
            print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = emit(bundle, args.format, out / f"report{SUFFIX[args.format]}", timing=args.timing)
        print(f"wrote {path}")
    elif args.format != "json" or args.print:
        sys.stdout.write(render(bundle, args.format, args.timing))
    _flag_summary(bundle)


def cmd_list_cases(args) -> int:
    for name, (params, text) in CATALOG.items():
        print(f"{name:15s} params: {', '.join(params) or '-':22s} {text}")
    return 0


def cmd_validate(args) -> int:
    sc = _load(args.config)
    if sc is None:
        return 2
    print(f"ok  {args.config}  scenario {sc.digest()[:16]}  checks: {', '.join(c.name for c in sc.checks) or '-'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lyhcheck", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def outputs(p):
        p.add_argument("--out", help="directory for the report file")
        p.add_argument("--format", choices=FORMATS, default="json")
        p.add_argument("--timing", action="store_true", help="include wall-clock timing in json")
        p.add_argument("--print", action="store_true", help="print the json report to stdout")

    p = sub.add_parser("run", help="evolve a scenario and run its checks")
    p.add_argument("config")
    outputs(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("refine", help="rerun a scenario on refined grids")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=2)
    outputs(p)
    p.set_defaults(func=cmd_refine)
    p = sub.add_parser("list-cases", help="print the nonlinearity catalog")
    p.set_defaults(func=cmd_list_cases)
    p = sub.add_parser("validate", help="parse and validate a scenario file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # anything unexpected is an error exit, not a traceback
        if args.verbose:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 2
