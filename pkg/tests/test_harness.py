import csv
import io
import json
import math
import textwrap
from pathlib import Path

import pytest

from lyhcheck.estimates import FAIL, PASS
from lyhcheck.harness import (ReportBundle, emit, empirical_orders, load_json, parse_config, parse_config_text,
                              refinement_study, render, run_scenario)
from lyhcheck.harness.cli import main

CONFIGS = Path(__file__).parent.parent / "configs"

SMALL = textwrap.dedent("""
    [manifold]
    d = 1
    lengths = 6.283185307179586
    counts = 32

    [weight]
    f = 0.2*cos(x)

    [initial]
    w0 = "2 + sin(x)"

    [solver]
    t_end = 0.2
    snapshot_times = 0.1, 0.2

    [checks.li_yau_global]
    m = 2
""")


@pytest.fixture(scope="module")
def small_bundle():
    return run_scenario(parse_config_text(SMALL))


def test_constant_scenario_all_pass():
    b = run_scenario(parse_config(CONFIGS / "constant.ini"))
    assert b.exit_code == 0 and not b.errors
    assert {c.name for c in b.checks} == {
        "li_yau_compact", "li_yau_global", "li_yau_local", "harnack", "hamilton", "liouville", "hessian_global",
        "hessian_local", "ly_hessian", "reversed_harnack", "hamilton_hessian", "cd_condition"}
    for c in b.checks:
        assert c.verdict == PASS, (c.name, c.flagged)
        if c.name != "harnack":
            assert c.min_margin == c.rhs_min


def test_fisher_scenario_hamilton_passes():
    b = run_scenario(parse_config(CONFIGS / "fisher_kpp.ini"))
    ham = [c for c in b.checks if c.name == "hamilton"]
    assert ham and all(c.verdict != FAIL for c in ham)
    assert ham[0].intermediates["xi"] == pytest.approx(3.0, abs=1e-9) or ham[0].intermediates["xi"] > 3.0


def test_positivity_abort_is_structured():
    b = run_scenario(parse_config(CONFIGS / "positivity_abort.ini"))
    assert b.exit_code == 2 and b.checks == []
    assert b.abort["reason"] == "positivity" and b.abort["value"] <= 0
    assert json.loads(render(b, "json"))["abort"]["t"] > 0


def test_csv_two_rows(small_bundle):
    rows = list(csv.reader(io.StringIO(render(small_bundle, "csv"))))
    assert rows[0][:3] == ["check", "t", "min_margin"]
    assert len(rows) == 3 and [r[0] for r in rows[1:]] == ["li_yau_global"] * 2


def test_plotdata_columns(small_bundle):
    lines = [ln for ln in render(small_bundle, "plotdata").splitlines() if ln and not ln.startswith("#")]
    assert len(lines) == 2 and all(len(ln.split()) == 4 for ln in lines)


def test_empty_check_list():
    b = run_scenario(parse_config_text(SMALL.split("[checks")[0]))
    assert b.checks == [] and json.loads(render(b, "json"))["checks"] == []
    assert b.exit_code == 0


def test_json_round_trip_bit_exact(small_bundle, tmp_path):
    path = emit(small_bundle, "json", tmp_path / "r.json")
    back = load_json(path)
    assert [c.min_margin for c in back.checks] == [c.min_margin for c in small_bundle.checks]
    assert render(back, "json") == render(small_bundle, "json")


def test_schema_version_checked(small_bundle):
    d = small_bundle.to_dict()
    d["schema_version"] = 99
    with pytest.raises(ValueError):
        ReportBundle.from_dict(d)


def test_determinism_byte_identical():
    sc = parse_config(CONFIGS / "fisher_kpp.ini")
    assert render(run_scenario(sc), "json") == render(run_scenario(parse_config(CONFIGS / "fisher_kpp.ini")), "json")


def test_timing_only_on_request(small_bundle):
    assert "timing" not in json.loads(render(small_bundle, "json"))
    assert "timing" in json.loads(render(small_bundle, "json", timing=True))


def test_exit_codes(small_bundle):
    fake = ReportBundle.from_dict(small_bundle.to_dict())
    assert fake.exit_code == 0
    fake.checks[0].verdict = FAIL
    assert fake.exit_code == 1
    fake.errors.append({"check": "x", "message": "y"})
    assert fake.exit_code == 2


def test_refinement_constant_orders_na():
    text = SMALL.replace('"2 + sin(x)"', '"1.5"').replace("[weight]\nf = 0.2*cos(x)\n", "")
    b = refinement_study(parse_config_text(text), 3)
    conv = b.convergence
    assert conv["w_final_self"]["errors"] == [0.0, 0.0]
    assert conv["w_final_self"]["orders"] == ["n/a"]
    assert conv["negative_margins_shrink"]["li_yau_global"]
    with pytest.raises(ValueError):
        refinement_study(parse_config_text(text), 1)


def test_refinement_table_and_order():
    b = refinement_study(parse_config_text(SMALL), 3)
    conv = b.convergence
    assert conv["levels"] == [[32], [64], [128]]
    assert len(conv["min_margin"]["li_yau_global"]) == 3
    errs = conv["w_final_self"]["errors"]
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_empirical_orders_values():
    assert empirical_orders([4.0, 1.0, 0.25]) == [2.0, 2.0]
    assert empirical_orders([1e-15, 1e-16]) == ["n/a"]


# -- command line ---------------------------------------------------------------------


def test_cli_run_writes_reports(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text(SMALL)
    for fmt, suffix in (("json", ".json"), ("csv", ".csv"), ("plotdata", ".dat")):
        assert main(["run", str(cfg), "--out", str(tmp_path), "--format", fmt]) == 0
        assert (tmp_path / f"report{suffix}").exists()
    assert "li_yau_global" in capsys.readouterr().out


def test_cli_validate_and_errors(tmp_path, capsys):
    good = tmp_path / "g.ini"
    good.write_text(SMALL)
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "b.ini"
    bad.write_text(SMALL.replace("m = 2", "alpha = 1"))
    assert main(["validate", str(bad)]) == 2
    assert "α > 1 required" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_cli_abort_exit_code(capsys):
    assert main(["run", str(CONFIGS / "positivity_abort.ini")]) == 2
    assert "abort" in capsys.readouterr().err


def test_cli_list_cases(capsys):
    assert main(["list-cases"]) == 0
    out = capsys.readouterr().out
    assert "fisher_kpp" in out and "caffarelli_lin" in out


def test_cli_flag_summary_on_stderr(tmp_path, capsys):
    cfg = tmp_path / "f.ini"
    cfg.write_text(SMALL.replace("[checks.li_yau_global]\nm = 2", "[checks.li_yau_compact]\nm = 2")
                   .replace("[weight]\nf = 0.2*cos(x)\n", "[potential]\nq = 0.1*sin(x)\n"))
    assert main(["run", str(cfg)]) == 0
    assert "flag: li_yau_compact: q ≡ 0" in capsys.readouterr().err
