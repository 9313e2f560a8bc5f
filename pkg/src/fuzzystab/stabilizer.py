"""Direct-method recovery of the exact additive map from an approximate one.

Three rescaled sequences are supported:

* ``dyadic``            ``h_k(a) = 2^-k f(2^k a)``
* ``linear_diagnostic`` ``h_k(a) = f(n a) / n`` with ``n = k + 1``
* ``superlinear``       ``h_k(a) = 2^k f(2^-k a)`` (reverse iteration, p > 1)

Each probe stops at the first ``k >= 1`` with crisp ``||h_k - h_{k-1}|| <= tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import Element
from .control import ApproximateMap, ControlFunction
from .fuzzy_norm import ConvergenceCheck, FuzzyNorm, cauchy_check, fuzzy_limit_check

DYADIC = "dyadic"
LINEAR = "linear_diagnostic"
SUPERLINEAR = "superlinear"
MODES = (DYADIC, LINEAR, SUPERLINEAR)

# Trajectories longer than this keep every early iterate and a geometric sample after.
TRAJECTORY_DENSE = 256
LINEAR_CHUNK = 1 << 16


class StabilizationError(RuntimeError):
    pass


class StabilizationOverflow(StabilizationError):
    def __init__(self, probe: int, n: int, size: float):
        super().__init__(f"iterate for probe {probe} exceeded the overflow cap at n={n} (crisp norm {size:g})")
        self.probe = probe
        self.n = n
        self.size = size


@dataclass(frozen=True)
class StabilizerConfig:
    mode: str = DYADIC
    max_iters: int = 64
    tol: float = 1e-10
    overflow_cap: float = 1e150
    fuzzy_delta: float = 1e-6

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown stabilizer mode {self.mode!r}; expected one of {MODES}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.overflow_cap > 0:
            raise ValueError("overflow_cap must be positive")
        if not 0 < self.fuzzy_delta < 1:
            raise ValueError("fuzzy_delta must lie in (0, 1)")


@dataclass
class StabilizationResult:
    probes: np.ndarray
    values: np.ndarray
    iters_used: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    trajectory: list[np.ndarray]
    trajectory_index: list[np.ndarray]
    mode_used: str
    map: ApproximateMap = field(repr=False)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    @property
    def h_on_probes(self) -> list[tuple[Element, Element]]:
        dom, cod = self.map.domain, self.map.codomain
        return [(Element(p, dom), Element(v, cod)) for p, v in zip(self.probes, self.values)]

    def recovered(self, i: int) -> Element:
        return Element(self.values[i], self.map.codomain)


def _scales(mode: str, k: np.ndarray) -> np.ndarray:
    """Factor ``c_k`` with ``h_k(a) = f(c_k a) / c_k``."""
    if mode == DYADIC:
        return np.ldexp(1.0, k)
    if mode == SUPERLINEAR:
        return np.ldexp(1.0, -k)
    return (k + 1).astype(float)


def iterate(f: ApproximateMap, a, n: int, mode: str = DYADIC) -> Element:
    """A single term of the rescaled sequence, indexed as in the formulas (``n >= 1`` for linear)."""
    coeffs = a.coeffs if isinstance(a, Element) else np.asarray(a, dtype=float)
    if mode == DYADIC:
        c = math.ldexp(1.0, n)
    elif mode == SUPERLINEAR:
        c = math.ldexp(1.0, -n)
    elif mode == LINEAR:
        if n < 1:
            raise ValueError("the linear sequence starts at n = 1")
        c = float(n)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Element(f.evaluate(c * coeffs) / c, f.codomain)


def _check_preconditions(ctrl: ControlFunction, mode: str):
    if mode == SUPERLINEAR:
        if not ctrl.superlinear:
            raise ValueError("superlinear mode needs a power-sum control with p > 1 marked for reverse iteration")
    elif ctrl.superlinear:
        raise ValueError(f"{mode} iteration needs 0<alpha<2; this control has alpha = {ctrl.alpha}")


def _keep_indices(n_total: int) -> np.ndarray:
    if n_total <= TRAJECTORY_DENSE:
        return np.arange(n_total)
    j = np.arange(0, 16 * math.ceil(math.log2(n_total / TRAJECTORY_DENSE)) + 1)
    geo = np.ceil(TRAJECTORY_DENSE * 2.0 ** (j / 16)).astype(np.int64)
    keep = np.concatenate([np.arange(TRAJECTORY_DENSE), geo[geo < n_total], [n_total - 1]])
    return np.unique(keep)


def stabilize(f: ApproximateMap, probes, cfg: StabilizerConfig = StabilizerConfig()) -> StabilizationResult:
    """Run the configured rescaled sequence for every probe."""
    _check_preconditions(f.control, cfg.mode)
    if isinstance(probes, np.ndarray):
        pts = np.atleast_2d(np.asarray(probes, dtype=float))
    else:
        pts = np.array([p.coeffs if isinstance(p, Element) else p for p in probes], dtype=float).reshape(-1, f.domain.dim)
    if pts.shape[-1] != f.domain.dim:
        raise ValueError("probes do not live in the domain of the map")
    if cfg.mode == LINEAR:
        return _stabilize_linear(f, pts, cfg)
    return _stabilize_geometric(f, pts, cfg)


def _first_stop(diffs: np.ndarray, tol: float) -> np.ndarray:
    """Index (into diffs) of the first entry <= tol per row, or -1."""
    if diffs.shape[1] == 0:
        return np.full(diffs.shape[0], -1)
    hit = diffs <= tol
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), first, -1)


def _guard_overflow(sizes: np.ndarray, upto: np.ndarray, cap: float, index_offset: int = 0):
    bad = ~(sizes <= cap)
    within = np.arange(sizes.shape[1])[None, :] <= upto[:, None]
    bad &= within
    if bad.any():
        probe, k = np.argwhere(bad)[0]
        raise StabilizationOverflow(int(probe), int(k) + index_offset, float(sizes[probe, k]))


def _stabilize_geometric(f: ApproximateMap, pts: np.ndarray, cfg: StabilizerConfig) -> StabilizationResult:
    n_probes = pts.shape[0]
    k = np.arange(cfg.max_iters + 1)
    c = _scales(cfg.mode, k)
    shift = np.zeros(n_probes, dtype=np.int64)
    work = pts
    if cfg.mode == DYADIC and n_probes:
        # Rescale by exact powers of two so every probe has crisp norm at most 1.
        r = f.domain.norms(pts)
        _, e = np.frexp(np.where(r > 0, r, 1.0))
        shift = np.where(r > 1.0, e, 0).astype(np.int64)
        work = np.ldexp(pts, -shift[:, None])
    args = c[None, :, None] * work[:, None, :]
    with np.errstate(all="ignore"):
        vals = f.evaluate(args) / c[None, :, None]
    if cfg.mode == DYADIC:
        vals = np.ldexp(vals, shift[:, None, None])
    sizes = f.codomain.norms(vals)
    diffs = f.codomain.norms(np.diff(vals, axis=1))
    if cfg.mode == SUPERLINEAR:
        # Capped noise makes 2^k f(2^-k a) rise then fall, and the two iterates
        # straddling the peak can coincide; demand two small steps in a row.
        pair = np.maximum(diffs[:, :-1], diffs[:, 1:])
        stop = _first_stop(pair, cfg.tol)
        stop = np.where(stop >= 0, stop + 1, -1)
    else:
        stop = _first_stop(diffs, cfg.tol)
    converged = stop >= 0
    last = np.where(converged, stop + 1, cfg.max_iters)
    _guard_overflow(sizes, last, cfg.overflow_cap)
    rows = np.arange(n_probes)
    values = vals[rows, last]
    residual = diffs[rows, last - 1]
    traj = [vals[i, : last[i] + 1].copy() for i in range(n_probes)]
    index = [np.arange(last[i] + 1) for i in range(n_probes)]
    return StabilizationResult(pts, values, last, residual, converged, traj, index, cfg.mode, f)


def _norms_at_most(alg, x: np.ndarray, bound: float) -> np.ndarray:
    """``alg.norms(x) <= bound`` without running power iteration where a cheap bound decides.

    For the operator norm of an m x m matrix, ``|M|_F / sqrt(m) <= |M|_2 <= |M|_F``.
    """
    if alg.norm_kind != "operator":
        return alg.norms(x) <= bound
    fro = np.sqrt(np.sum(alg.left_regular(x) ** 2, axis=(-2, -1)))
    out = fro <= bound
    undecided = ~out & (fro / np.sqrt(alg.dim) <= bound)
    if undecided.any():
        out[undecided] = alg.norms(x[undecided]) <= bound
    return out


def _stabilize_linear(f: ApproximateMap, pts: np.ndarray, cfg: StabilizerConfig) -> StabilizationResult:
    n_probes = pts.shape[0]
    cod = f.codomain
    total = cfg.max_iters  # k = 0 .. max_iters - 1, i.e. n = 1 .. max_iters
    keep_all = _keep_indices(total)
    values = np.zeros((n_probes, cod.dim))
    iters = np.zeros(n_probes, dtype=np.int64)
    residual = np.full(n_probes, np.nan)
    converged = np.zeros(n_probes, dtype=bool)
    traj, index = [], []
    for p in range(n_probes):
        a = pts[p]
        prev = None
        kept_vals, kept_idx = [], []
        k0, chunk = 0, 64
        while k0 < total:
            k1 = min(total, k0 + chunk)
            c = _scales(LINEAR, np.arange(k0, k1))
            with np.errstate(all="ignore"):
                vals = f.evaluate(c[:, None] * a[None, :]) / c[:, None]
            seq = vals if prev is None else np.vstack([prev[None, :], vals])
            first_k = k0 if prev is None else k0 - 1
            steps = np.diff(seq, axis=0)
            hits = np.flatnonzero(_norms_at_most(cod, steps, cfg.tol))
            end_k = first_k + int(hits[0]) + 1 if hits.size else k1 - 1
            bad = np.flatnonzero(~_norms_at_most(cod, vals[: end_k - k0 + 1], cfg.overflow_cap))
            if bad.size:
                raise StabilizationOverflow(p, k0 + int(bad[0]) + 1, float(cod.norms(vals[bad[0]])))
            if end_k > first_k:
                residual[p] = float(cod.norms(steps[end_k - first_k - 1]))
            sel = keep_all[(keep_all >= k0) & (keep_all <= end_k)]
            kept_vals.append(vals[sel - k0])
            kept_idx.append(sel)
            values[p] = vals[end_k - k0]
            iters[p] = end_k
            if hits.size:
                converged[p] = True
                break
            prev = vals[-1]
            k0 = k1
            chunk = min(chunk * 2, LINEAR_CHUNK)
        idx = np.concatenate(kept_idx)
        tr = np.vstack(kept_vals)
        if idx.size == 0 or idx[-1] != iters[p]:
            idx = np.append(idx, iters[p])
            tr = np.vstack([tr, values[p][None, :]])
        traj.append(tr)
        index.append(idx)
    return StabilizationResult(pts, values, iters, residual, converged, traj, index, LINEAR, f)


class RecoveredMap:
    """The stabilized map as a batch-evaluable function on arbitrary points."""

    def __init__(self, f: ApproximateMap, cfg: StabilizerConfig = StabilizerConfig()):
        self.f = f
        self.cfg = cfg
        self.domain = f.domain
        self.codomain = f.codomain
        self.unconverged = 0
        self._cache: dict[bytes, np.ndarray] = {}

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        """Stabilize each distinct input row once; rows are cached across calls."""
        coeffs = np.asarray(coeffs, dtype=float)
        flat = np.ascontiguousarray(coeffs.reshape(-1, coeffs.shape[-1]))
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        keys = [row.tobytes() for row in uniq]
        missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            res = stabilize(self.f, uniq[missing], self.cfg)
            self.unconverged += int(np.sum(~res.converged))
            for i, v in zip(missing, res.values):
                self._cache[keys[i]] = v
        vals = np.array([self._cache[k] for k in keys]).reshape(len(keys), self.codomain.dim)
        return vals[inverse.reshape(-1)].reshape(coeffs.shape[:-1] + (self.codomain.dim,))

    def __call__(self, a: Element) -> Element:
        return Element(self.evaluate(a.coeffs), self.codomain)


# -- classical crisp bounds -----------------------------------------------------


def hyers_bound(eps: float) -> float:
    """Constant-defect bound: the recovered map stays within ``eps``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return float(eps)


def rassias_bound(eps: float, p: float, x_norm: float) -> float:
    """``2 eps / (2 - 2^p) * ||x||^p`` for ``p < 1``."""
    if p >= 1:
        raise ValueError(f"the power-sum bound needs p < 1, got {p}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if p < 0 and x_norm <= 0:
        raise ValueError("for p < 0 the bound only holds at nonzero x")
    return 2.0 * eps / (2.0 - 2.0**p) * x_norm**p


def fuzzy_bound_threshold(ctrl: ControlFunction, a: Element) -> float:
    """Crisp magnitude ``2 phi(a, a) / (2 - alpha)`` whose N'-value bounds ``N(f(a) - h(a), t)``.

    Reverse controls use ``2 phi(a, a) / (alpha - 2)``.
    """
    r = a.algebra.norms(a.coeffs)
    return float(ctrl.bound_factor() * ctrl.phi(r, r))


def bound_thresholds(ctrl: ControlFunction, r: np.ndarray) -> np.ndarray:
    return ctrl.bound_factor() * ctrl.phi(r, r)


# -- post hoc certification -------------------------------------------------------


@dataclass
class TrajectoryCertificate:
    passed: bool
    limit: list[ConvergenceCheck]
    cauchy: list[ConvergenceCheck]


def certify_trajectory(
    result: StabilizationResult, norm: FuzzyNorm, thresholds, delta: float | None = None
) -> TrajectoryCertificate:
    """Fuzzy limit and Cauchy checks of every recorded trajectory against its returned value."""
    delta = delta if delta is not None else 1e-6
    limit = [fuzzy_limit_check(tr, v, norm, thresholds, delta) for tr, v in zip(result.trajectory, result.values)]
    cauchy = [cauchy_check(tr, norm, thresholds, delta) for tr in result.trajectory]
    return TrajectoryCertificate(all(limit) and all(cauchy), limit, cauchy)
