"""Writing report bundles as json, csv or plot-ready columns."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .runner import ReportBundle

FORMATS = ("json", "csv", "plotdata")
CSV_COLUMNS = ("check", "t", "min_margin", "tolerance", "verdict", "lhs_max", "rhs_min", "flags")


def to_json(bundle: ReportBundle, timing: bool = False) -> str:
    return json.dumps(bundle.to_dict(timing=timing), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def to_csv(bundle: ReportBundle) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in bundle.checks:
        writer.writerow([c.name, repr(c.t), repr(c.min_margin), repr(c.tolerance), c.verdict,
                         repr(c.lhs_max), repr(c.rhs_min), ";".join(c.flagged)])
    return buf.getvalue()


def to_plotdata(bundle: ReportBundle) -> str:
    """One whitespace-separated block per check: t, min margin, sup LHS, inf RHS."""
    blocks: dict[str, list] = {}
    for c in bundle.checks:
        blocks.setdefault(c.name, []).append(c)
    out = []
    for name, reps in blocks.items():
        out.append(f"# check: {name}\n# t min_margin lhs_sup rhs_inf\n")
        out.extend(f"{c.t!r} {c.min_margin!r} {c.lhs_max!r} {c.rhs_min!r}\n" for c in reps)
        out.append("\n\n")
    return "".join(out)


def render(bundle: ReportBundle, fmt: str, timing: bool = False) -> str:
    if fmt == "json":
        return to_json(bundle, timing)
    if fmt == "csv":
        return to_csv(bundle)
    if fmt == "plotdata":
        return to_plotdata(bundle)
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def emit(bundle: ReportBundle, fmt: str, path, timing: bool = False) -> Path:
    path = Path(path)
    path.write_text(render(bundle, fmt, timing))
    return path


def load_json(path) -> ReportBundle:
    return ReportBundle.from_dict(json.loads(Path(path).read_text()))
