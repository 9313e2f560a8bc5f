"""Defect measurement and certification of the stability conclusions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import Element, FiniteAlgebra
from .control import HOMOMORPHISM, ApproximateMap, ControlFunction
from .fuzzy_norm import SLACK, FuzzyNorm, SampleGrid
from .stabilizer import (
    RecoveredMap,
    StabilizationResult,
    StabilizerConfig,
    bound_thresholds,
    stabilize,
)

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"
LEIBNIZ = "leibniz"
# Intermediate identities of the bootstrap, compared against the approximate map f:
#   mixed_product  h(ab) - h(a) f(b)         product_match  h(a) h(b) - h(a) f(b)
#   mixed_leibniz  h(ab) - a f(b) - h(a) b   leibniz_match  a f(b) - a h(b)
MIXED_PRODUCT = "mixed_product"
PRODUCT_MATCH = "product_match"
MIXED_LEIBNIZ = "mixed_leibniz"
LEIBNIZ_MATCH = "leibniz_match"

DEFECT_KINDS = (
    ADDITIVE, MULTIPLICATIVE, LEIBNIZ,
    MIXED_PRODUCT, PRODUCT_MATCH, MIXED_LEIBNIZ, LEIBNIZ_MATCH,
)
KINDS_FOR_MODE = {
    HOMOMORPHISM: (ADDITIVE, MULTIPLICATIVE, MIXED_PRODUCT, PRODUCT_MATCH),
    "derivation": (ADDITIVE, LEIBNIZ, MIXED_LEIBNIZ, LEIBNIZ_MATCH),
}
NEEDS_F = {MIXED_PRODUCT, PRODUCT_MATCH, MIXED_LEIBNIZ, LEIBNIZ_MATCH}


@dataclass
class DefectReport:
    kind: str
    max_defect: float
    witness: tuple[Element, Element] | None
    witness_index: tuple[int, int] | None
    grid_size: tuple[int, int]
    residuals: np.ndarray


def _pairs(grid: SampleGrid):
    pts = grid.points
    n = len(pts)
    a = np.repeat(pts[:, None, :], n, axis=1)
    b = np.repeat(pts[None, :, :], n, axis=0)
    return a, b


def defect(kind: str, h, grid: SampleGrid, *, f=None) -> DefectReport:
    """Worst crisp residual of one functional identity over all grid pairs ``(a, b)``.

    ``h`` is any object with ``evaluate``, ``domain`` and ``codomain`` (an exact
    :class:`~fuzzystab.control.LinearMap`, an :class:`ApproximateMap`, a
    :class:`RecoveredMap`).  The intermediate identities compare ``h`` with the
    approximate map ``f``.
    """
    if kind not in DEFECT_KINDS:
        raise ValueError(f"unknown defect kind {kind!r}")
    if kind in NEEDS_F and f is None:
        raise ValueError(f"{kind} compares the recovered map with the approximate one; pass f=")
    dom: FiniteAlgebra = h.domain
    cod: FiniteAlgebra = h.codomain
    a, b = _pairs(grid)
    ab = dom.multiply(a, b)
    if kind == ADDITIVE:
        res = h.evaluate(a + b) - h.evaluate(a) - h.evaluate(b)
    elif kind == MULTIPLICATIVE:
        res = h.evaluate(ab) - cod.multiply(h.evaluate(a), h.evaluate(b))
    elif kind == LEIBNIZ:
        res = h.evaluate(ab) - dom.multiply(a, h.evaluate(b)) - dom.multiply(h.evaluate(a), b)
    elif kind == MIXED_PRODUCT:
        res = h.evaluate(ab) - cod.multiply(h.evaluate(a), f.evaluate(b))
    elif kind == PRODUCT_MATCH:
        ha = h.evaluate(a)
        res = cod.multiply(ha, h.evaluate(b)) - cod.multiply(ha, f.evaluate(b))
    elif kind == MIXED_LEIBNIZ:
        res = h.evaluate(ab) - dom.multiply(a, f.evaluate(b)) - dom.multiply(h.evaluate(a), b)
    else:
        res = dom.multiply(a, f.evaluate(b)) - dom.multiply(a, h.evaluate(b))
    norms = cod.norms(res)
    i, j = np.unravel_index(int(np.argmax(norms)), norms.shape)
    pts = grid.points
    witness = (Element(pts[i], dom), Element(pts[j], dom))
    return DefectReport(kind, float(norms[i, j]), witness, (int(i), int(j)), (len(pts) ** 2, len(grid.thresholds)), norms)


@dataclass
class BootstrapCheck:
    passed: bool
    combined: float
    bound: float


def bootstrap_check(reports: dict[str, DefectReport], h_max: float, mode: str = HOMOMORPHISM) -> BootstrapCheck:
    """The combination step: two intermediate identities bound the full product identity."""
    if mode == HOMOMORPHISM:
        combined = reports[MULTIPLICATIVE].max_defect
        theta = max(reports[MIXED_PRODUCT].max_defect, reports[PRODUCT_MATCH].max_defect)
    else:
        combined = reports[LEIBNIZ].max_defect
        theta = max(reports[MIXED_LEIBNIZ].max_defect, reports[LEIBNIZ_MATCH].max_defect)
    bound = 2.0 * theta * (1.0 + h_max)
    # Rounding in the two evaluation routes of the same quantity.
    return BootstrapCheck(combined <= bound + 1e-12 * (1.0 + h_max), combined, bound)


@dataclass
class StabilityBoundResult:
    passed: bool
    min_slack: float
    crisp_passed: bool
    distance: np.ndarray
    threshold: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    witness: dict | None

    def __bool__(self):
        return self.passed


def check_stability_bound(
    f: ApproximateMap,
    h,
    ctrl: ControlFunction,
    grid: SampleGrid,
    norm: FuzzyNorm | None = None,
    *,
    cfg: StabilizerConfig | None = None,
) -> StabilityBoundResult:
    """``N(f(a) - h(a), t) >= N'(2 phi(a, a) / (2 - alpha), t)`` at every grid point and threshold.

    ``h`` may be a :class:`StabilizationResult` whose probes are exactly the grid
    points, or anything batch-evaluable (e.g. :class:`RecoveredMap`).
    """
    norm = norm or ctrl.codomain_norm.on(f.codomain)
    pts = grid.points
    if isinstance(h, StabilizationResult):
        if h.probes.shape == pts.shape and np.array_equal(h.probes, pts):
            hv = h.values
        else:
            hv = RecoveredMap(f, cfg or StabilizerConfig(mode=h.mode_used)).evaluate(pts)
    else:
        hv = h.evaluate(pts)
    dist = f.codomain.norms(f.evaluate(pts) - hv)
    thr = bound_thresholds(ctrl, f.domain.norms(pts))
    t = grid.t
    lhs = norm.truth(dist[:, None], t[None, :])
    rhs = ctrl.codomain_norm.truth(thr[:, None], t[None, :])
    slack = lhs - rhs
    bad = slack < -SLACK
    crisp_ok = bool(np.all(dist <= thr + SLACK * np.maximum(1.0, thr)))
    witness = None
    if bad.any():
        i, k = np.argwhere(bad)[0]
        witness = {"a": int(i), "t": float(t[k]), "lhs": float(lhs[i, k]), "rhs": float(rhs[i, k])}
    return StabilityBoundResult(not bad.any(), float(np.min(slack)), crisp_ok, dist, thr, lhs, rhs, witness)


@dataclass
class UniquenessResult:
    passed: bool
    fuzzy_passed: bool
    crisp_passed: bool
    max_gap: float
    crisp_tol: float
    min_truth: float
    gaps: np.ndarray
    results: tuple[StabilizationResult, StabilizationResult]
    witness: dict | None

    def __bool__(self):
        return self.passed


def check_uniqueness(
    f: ApproximateMap,
    probes,
    cfg_a: StabilizerConfig,
    cfg_b: StabilizerConfig,
    grid_thresholds,
    delta: float,
    norm: FuzzyNorm | None = None,
    crisp_tol: float | None = None,
) -> UniquenessResult:
    """Run two constructions and require ``N(hA(a) - hB(a), t) > 1 - delta`` everywhere.

    The crisp side requires ``||hA(a) - hB(a)|| <= crisp_tol`` (default
    ``100 * max(tolA, tolB)``).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    norm = norm or f.control.codomain_norm.on(f.codomain)
    res_a = stabilize(f, probes, cfg_a)
    res_b = stabilize(f, probes, cfg_b)
    gaps = f.codomain.norms(res_a.values - res_b.values)
    t = np.asarray(grid_thresholds, dtype=float)
    truth = norm.truth(gaps[:, None], t[None, :])
    crisp_tol = 100.0 * max(cfg_a.tol, cfg_b.tol) if crisp_tol is None else crisp_tol
    fuzzy_ok = bool(np.all(truth > 1.0 - delta))
    crisp_ok = bool(np.all(gaps <= crisp_tol))
    witness = None
    if not (fuzzy_ok and crisp_ok):
        i = int(np.argmax(gaps))
        witness = {"probe": i, "gap": float(gaps[i]), "truth": float(np.min(truth[i]))}
    return UniquenessResult(
        fuzzy_ok and crisp_ok, fuzzy_ok, crisp_ok,
        float(np.max(gaps)) if gaps.size else 0.0, crisp_tol,
        float(np.min(truth)) if truth.size else 1.0,
        gaps, (res_a, res_b), witness,
    )
