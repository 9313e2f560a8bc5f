"""End-to-end run of a scenario through the fixed sequence of checks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .control import HOMOMORPHISM, build_approximate_map, check_scaling
from .fuzzy_norm import check_algebra_condition, check_axioms
from .scenario import Scenario
from .stabilizer import RecoveredMap, StabilizationError, certify_trajectory, stabilize
from .verifier import (
    ADDITIVE,
    KINDS_FOR_MODE,
    LEIBNIZ,
    MULTIPLICATIVE,
    NEEDS_F,
    bootstrap_check,
    check_stability_bound,
    check_uniqueness,
    defect,
)

STAGES = (
    "axioms",
    "algebra_condition",
    "scaling",
    "domination",
    "stabilize",
    "defects",
    "stability_bound",
    "uniqueness",
)
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BASE = 10

VERBS = {
    "axioms": STAGES[:2],
    "stabilize": STAGES[2:5],
    "verify": STAGES[2:],
    "run": STAGES,
}


def stage_exit_code(name: str) -> int:
    return EXIT_BASE + STAGES.index(name)


@dataclass
class StageOutcome:
    name: str
    status: str  # "pass", "fail" or "skipped"
    detail: str = ""

    @property
    def exit_code(self) -> int:
        return stage_exit_code(self.name) if self.status == "fail" else EXIT_OK


@dataclass
class RunReport:
    scenario: Scenario
    stages: list[StageOutcome]
    results: dict = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.status != "fail" for s in self.stages)

    @property
    def exit_code(self) -> int:
        for s in self.stages:
            if s.status == "fail":
                return s.exit_code
        return EXIT_OK

    def stage(self, name: str) -> StageOutcome:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


class _Run:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.results: dict = {}

    # Each stage returns (passed, detail) and stores its raw result.

    def axioms(self):
        rep = check_axioms(self.sc.norm, self.sc.grid, self.sc.scalars)
        self.results["axioms"] = rep
        bad = [r.axiom for r in rep.failures()]
        return rep.passed, "all axioms hold on the grid" if not bad else "failed: " + ",".join(bad)

    def algebra_condition(self):
        res = check_algebra_condition(self.sc.norm, self.sc.algebra, self.sc.grid)
        self.results["algebra_condition"] = res
        return res.passed, f"violations={res.violations}/{res.checked}"

    def scaling(self):
        res = check_scaling(self.sc.control, self.sc.grid)
        self.results["scaling"] = res
        return res.passed, f"min_slack={res.min_slack:.6e}"

    def domination(self):
        pert = self.sc.perturbation
        f, res = build_approximate_map(
            self.sc.base, self.sc.control, self.sc.grid,
            noise_seed=pert["seed"], noise_scale=pert["noise_scale"], mode=pert["mode"],
            profile=pert["profile"], norm=self.sc.norm, max_retries=pert["max_retries"],
        )
        self.results["map"] = f
        self.results["domination"] = res
        return res.passed, f"attempts={res.attempts} noise_scale={res.noise_scale:.6e}"

    def stabilize(self):
        f = self.results["map"]
        try:
            res = stabilize(f, self.sc.grid.points, self.sc.stabilizer)
        except StabilizationError as exc:
            self.results["stabilize_error"] = str(exc)
            return False, str(exc)
        self.results["stabilize"] = res
        self.results["trajectory"] = certify_trajectory(
            res, self.sc.norm, self.sc.grid.thresholds, self.sc.stabilizer.fuzzy_delta
        )
        unconverged = int(np.sum(~res.converged))
        return unconverged == 0, f"unconverged={unconverged}/{len(res.converged)} max_iters_used={int(res.iters_used.max())}"

    def defects(self):
        f = self.results["map"]
        h = RecoveredMap(f, self.sc.stabilizer)
        mode = self.sc.mode
        reports = {kind: defect(kind, h, self.sc.grid, f=f if kind in NEEDS_F else None) for kind in KINDS_FOR_MODE[mode]}
        h_max = float(np.max(f.codomain.norms(h.evaluate(self.sc.grid.points))))
        boot = bootstrap_check(reports, h_max, mode)
        tol = self.sc.identity_tol
        product_kind = MULTIPLICATIVE if mode == HOMOMORPHISM else LEIBNIZ
        gating = (ADDITIVE, product_kind)
        ok = all(reports[k].max_defect <= tol for k in gating) and boot.passed and h.unconverged == 0
        self.results["defects"] = {"reports": reports, "bootstrap": boot, "gating": gating, "tol": tol, "h_max": h_max}
        worst = max(reports[k].max_defect for k in gating)
        return ok, f"worst_gating={worst:.6e} tol={tol:.6e} bootstrap={'ok' if boot.passed else 'fail'} unconverged={h.unconverged}"

    def stability_bound(self):
        res = check_stability_bound(self.results["map"], self.results["stabilize"], self.sc.control, self.sc.grid, self.sc.norm)
        self.results["stability_bound"] = res
        return res.passed and res.crisp_passed, f"min_slack={res.min_slack:.6e} crisp={'ok' if res.crisp_passed else 'fail'}"

    def uniqueness(self):
        u = self.sc.uniqueness
        res = check_uniqueness(
            self.results["map"], self.sc.grid.points, self.sc.stabilizer, self.sc.alt_stabilizer,
            self.sc.grid.thresholds, u["delta"], self.sc.norm, u["crisp_tol"],
        )
        self.results["uniqueness"] = res
        return res.passed, f"max_gap={res.max_gap:.6e} crisp_tol={res.crisp_tol:.6e} modes={self.sc.stabilizer.mode}/{self.sc.alt_stabilizer.mode}"


def run(scenario: Scenario, stages: tuple[str, ...] = STAGES) -> RunReport:
    """Run ``stages`` in their fixed order, stopping at the first failure."""
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stages {unknown}")
    wanted = [s for s in STAGES if s in stages]
    runner = _Run(scenario)
    outcomes: list[StageOutcome] = []
    timings: dict[str, float] = {}
    failed = False
    for name in wanted:
        if failed:
            outcomes.append(StageOutcome(name, "skipped", "an earlier stage failed"))
            continue
        start = time.perf_counter()
        ok, detail = getattr(runner, name)()
        timings[name] = time.perf_counter() - start
        outcomes.append(StageOutcome(name, "pass" if ok else "fail", detail))
        failed = not ok
    return RunReport(scenario, outcomes, runner.results, timings)
