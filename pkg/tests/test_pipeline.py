import hashlib
from pathlib import Path

import pytest

from fuzzystab.pipeline import STAGES, VERBS, run, stage_exit_code
from fuzzystab.report import DETERMINISTIC_FILES, TIMINGS_FILE, emit_report
from fuzzystab.scenario import parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def load(name, *overrides):
    return parse_scenario((SCENARIOS / f"{name}.toml").read_text(), list(overrides))


def test_exit_codes_follow_stage_order():
    assert [stage_exit_code(s) for s in STAGES] == list(range(10, 18))


def test_powersum_scenario_passes_everything():
    rep = run(load("real_powersum"))
    assert rep.passed and rep.exit_code == 0
    assert [s.name for s in rep.stages] == list(STAGES)
    reports = rep.results["defects"]["reports"]
    assert reports["multiplicative"].max_defect <= 1e-8


def test_exact_euler_derivation():
    rep = run(load("poly2_exact_euler"))
    assert rep.passed
    assert rep.results["domination"].product.max() <= 1e-15
    stab = rep.results["stabilize"]
    assert (stab.iters_used == 1).all()
    assert rep.results["defects"]["reports"]["leibniz"].max_defect <= 1e-15


def test_corrupted_norm_halts_at_axioms():
    rep = run(load("corrupted_levels"))
    assert rep.exit_code == 10
    assert rep.stage("axioms").status == "fail"
    assert rep.results["axioms"]["N2"].witness["x"] == 0
    assert all(s.status == "skipped" for s in rep.stages[1:])


def test_ratio_norm_halts_at_algebra_condition():
    rep = run(load("real_ratio_norm"))
    assert rep.exit_code == 11 and rep.stage("axioms").status == "pass"


def test_sabotaged_uniqueness_fails_last_stage():
    rep = run(load("real_constant", "uniqueness.mode=dyadic", "uniqueness.max_iters=2"))
    assert rep.exit_code == 17
    assert all(s.status == "pass" for s in rep.stages[:-1])


def test_verbs_select_stages():
    sc = load("real_constant")
    assert [s.name for s in run(sc, VERBS["axioms"]).stages] == ["axioms", "algebra_condition"]
    assert [s.name for s in run(sc, VERBS["stabilize"]).stages] == ["scaling", "domination", "stabilize"]
    with pytest.raises(ValueError):
        run(sc, ("nonsense",))


def test_report_tables(tmp_path):
    sc = load("real_constant")
    rep = run(sc)
    out = emit_report(rep, tmp_path)
    for name in DETERMINISTIC_FILES + (TIMINGS_FILE,):
        assert (out / name).exists(), name
    n, k = len(sc.grid.points), len(sc.grid.thresholds)
    bound_rows = (out / "bound.csv").read_text().splitlines()
    assert len(bound_rows) == 1 + n * k
    assert len((out / "scaling.csv").read_text().splitlines()) == 1 + n * n
    assert "eps = 0.1\n" in (out / "scenario.toml").read_text()
    stab = (out / "stabilization.csv").read_text().splitlines()
    assert stab[0].startswith("point,iters_used,residual") and len(stab) == 1 + n


def test_tables_have_headers_when_nothing_ran(tmp_path):
    rep = run(load("real_constant"), ())
    out = emit_report(rep, tmp_path)
    for name in DETERMINISTIC_FILES:
        if name.endswith(".csv") and name != "points.csv":
            lines = (out / name).read_text().splitlines()
            assert len(lines) == 1 and "," in lines[0], name


def test_two_runs_are_byte_identical(tmp_path):
    digests = []
    for i in range(2):
        out = emit_report(run(load("matrix2_homomorphism")), tmp_path / str(i))
        digests.append({n: hashlib.sha256((out / n).read_bytes()).hexdigest() for n in DETERMINISTIC_FILES})
    assert digests[0] == digests[1]
