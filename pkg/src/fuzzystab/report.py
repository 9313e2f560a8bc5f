"""Writing a :class:`~fuzzystab.pipeline.RunReport` to disk.

Every table is a CSV file with a header row, written even when its stage did
not run.  Floats use ``.16e`` so identical runs give identical bytes; wall-clock
timings live only in ``timings.txt``.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .pipeline import STAGES, RunReport

DETERMINISTIC_FILES = (
    "summary.txt",
    "scenario.toml",
    "stages.csv",
    "points.csv",
    "axioms.csv",
    "algebra_condition.csv",
    "scaling.csv",
    "domination.csv",
    "stabilization.csv",
    "defects.csv",
    "bound.csv",
    "uniqueness.csv",
)
TIMINGS_FILE = "timings.txt"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".16e")
    if isinstance(value, dict):
        return ";".join(f"{k}={fmt(v)}" for k, v in value.items())
    if isinstance(value, (tuple, list)):
        return " ".join(fmt(v) for v in value)
    return str(value)


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def build_tables(report: RunReport) -> dict[str, str]:
    """All CSV tables as text, keyed by file name."""
    sc = report.scenario
    res = report.results
    pts = sc.grid.points
    m = sc.algebra.dim
    coeff_cols = [f"c{i}" for i in range(m)]
    npts = len(pts)
    tables: dict[str, str] = {}

    tables["stages.csv"] = _csv(
        ["order", "stage", "status", "exit_code", "detail"],
        [(i, s.name, s.status, s.exit_code, s.detail) for i, s in enumerate(report.stages)],
    )
    norms = sc.algebra.norms(pts)
    tables["points.csv"] = _csv(["point"] + coeff_cols + ["norm"], [(i, *pts[i], norms[i]) for i in range(npts)])

    rows = []
    if "axioms" in res:
        for r in res["axioms"].results.values():
            rows.append((r.axiom, r.passed, r.checked, r.witness, r.note))
    tables["axioms.csv"] = _csv(["axiom", "passed", "checked", "witness", "note"], rows)

    rows = []
    if "algebra_condition" in res:
        r = res["algebra_condition"]
        rows.append((r.passed, r.min_slack, r.violations, r.checked, r.witness))
    tables["algebra_condition.csv"] = _csv(["passed", "min_slack", "violations", "checked", "witness"], rows)

    rows = []
    if "scaling" in res:
        r = res["scaling"]
        for i in range(npts):
            for j in range(npts):
                rows.append((i, j, r.phi_scaled[i, j], r.phi_bound[i, j]))
    tables["scaling.csv"] = _csv(["a", "b", "phi_scaled", "phi_bound"], rows)

    rows = []
    if "domination" in res:
        r = res["domination"]
        for i in range(npts):
            for j in range(npts):
                rows.append((i, j, r.phi[i, j], r.additive[i, j], r.product[i, j]))
    tables["domination.csv"] = _csv(["a", "b", "phi", "additive_defect", "product_defect"], rows)

    rows = []
    if "stabilize" in res:
        r = res["stabilize"]
        cert = res.get("trajectory")
        for i in range(npts):
            lim = cert.limit[i].passed if cert else None
            cau = cert.cauchy[i].passed if cert else None
            rows.append((i, r.iters_used[i], r.residual[i], r.converged[i], lim, cau, *r.values[i]))
    tables["stabilization.csv"] = _csv(
        ["point", "iters_used", "residual", "converged", "fuzzy_limit", "fuzzy_cauchy"] + [f"h{i}" for i in range(m)], rows
    )

    rows = []
    if "defects" in res:
        d = res["defects"]
        for kind, rep in d["reports"].items():
            gating = kind in d["gating"]
            ok = rep.max_defect <= d["tol"] if gating else None
            wi = rep.witness_index or (None, None)
            rows.append((kind, rep.max_defect, wi[0], wi[1], rep.grid_size[0], rep.grid_size[1], gating, d["tol"], ok))
        boot = d["bootstrap"]
        rows.append(("bootstrap", boot.combined, None, None, None, None, True, boot.bound, boot.passed))
    tables["defects.csv"] = _csv(
        ["kind", "max_defect", "witness_a", "witness_b", "pairs", "thresholds", "gating", "tolerance", "passed"], rows
    )

    rows = []
    if "stability_bound" in res:
        r = res["stability_bound"]
        t = sc.grid.t
        for i in range(npts):
            for k in range(len(t)):
                rows.append((i, k, t[k], r.distance[i], r.threshold[i], r.lhs[i, k], r.rhs[i, k], r.lhs[i, k] >= r.rhs[i, k] - 1e-12))
    tables["bound.csv"] = _csv(["point", "threshold_index", "t", "distance", "bound", "lhs", "rhs", "passed"], rows)

    rows = []
    if "uniqueness" in res:
        r = res["uniqueness"]
        ra, rb = r.results
        for i in range(npts):
            rows.append((i, r.gaps[i], r.gaps[i] <= r.crisp_tol, ra.iters_used[i], rb.iters_used[i], ra.converged[i], rb.converged[i]))
    tables["uniqueness.csv"] = _csv(
        ["point", "gap", "within_crisp_tol", "iters_a", "iters_b", "converged_a", "converged_b"], rows
    )
    return tables


def summary_text(report: RunReport) -> str:
    sc = report.scenario
    lines = [
        f"algebra: {sc.algebra.label} (dim {sc.algebra.dim}, {sc.algebra.norm_kind} norm)",
        f"fuzzy norm: {sc.norm.kind.value}",
        f"control: {sc.control.kind} eps={fmt(sc.control.eps)} alpha={fmt(sc.control.alpha)}",
        f"map: {sc.mode} base={sc.perturbation['base']} profile={sc.perturbation['profile']}",
        f"grid: {len(sc.grid.points)} points x {len(sc.grid.thresholds)} thresholds",
        "",
    ]
    width = max(len(s) for s in STAGES)
    for s in report.stages:
        lines.append(f"{s.name:<{width}}  {s.status.upper():<7}  {s.detail}")
    cert = report.results.get("trajectory")
    if cert is not None:
        lines.append(f"{'trajectory':<{width}}  {'INFO':<7}  fuzzy limit/Cauchy certificate {'holds' if cert.passed else 'does not hold'} at delta={fmt(sc.stabilizer.fuzzy_delta)}")
    if "axioms" in report.results:
        lines.append(f"{'':<{width}}  {'NOTE':<7}  N6 is checked at grid resolution only")
    lines += ["", f"exit code: {report.exit_code}"]
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, out_dir) -> Path:
    """Write summary, echo, tables and timings under ``out_dir``; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text(summary_text(report))
    (out / "scenario.toml").write_text(report.scenario.echo())
    for name, text in build_tables(report).items():
        (out / name).write_text(text)
    timing = "".join(f"{name} {report.timings[name]:.3f}s\n" for name in STAGES if name in report.timings)
    (out / TIMINGS_FILE).write_text(timing)
    return out
