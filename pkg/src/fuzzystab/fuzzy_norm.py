"""Computable fuzzy norms on finite-dimensional spaces.

Every supported kind is a function of the crisp magnitude ``r = ||x||`` and
the threshold ``a``:

* ``RatioInduced``:   ``a / (a + r)`` for ``a > 0``
* ``CrispIndicator``: ``1`` if ``a > r`` else ``0``
* ``LevelFamily``:    ``max{c : a >= w_c r}`` over stored levels ``(c, w_c)``

and ``0`` for ``a <= 0`` in all cases.  :meth:`FuzzyNorm.truth` evaluates
that function on magnitudes directly, which is also how codomain norms of
control functions are applied to crisp magnitudes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import Element, FiniteAlgebra

SLACK = 1e-12
DEFAULT_THRESHOLDS = tuple(10.0**k for k in range(-3, 4))
DEFAULT_SCALARS = (-3.0, -2.0, -0.5, -0.25, 0.25, 0.5, 2.0, 3.0)
DEFAULT_RANDOM_POINTS = 40


class NormKind(enum.Enum):
    RATIO = "ratio"
    INDICATOR = "indicator"
    LEVELS = "levels"


@dataclass(frozen=True, eq=False)
class FuzzyNorm:
    kind: NormKind
    carrier_dim: int
    crisp_norm: Callable[[np.ndarray], np.ndarray] | None = None
    levels: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.carrier_dim < 1:
            raise ValueError("carrier dimension must be positive")
        if self.kind is NormKind.LEVELS:
            if not self.levels:
                raise ValueError("a level family needs at least one level")
            levels = tuple(sorted((float(c), float(w)) for c, w in self.levels))
            cs = [c for c, _ in levels]
            ws = [w for _, w in levels]
            if any(not 0.0 < c <= 1.0 for c in cs) or len(set(cs)) != len(cs):
                raise ValueError("levels must be distinct confidences in (0, 1]")
            if any(w <= 0 for w in ws) or any(b < a for a, b in zip(ws, ws[1:])):
                raise ValueError("level weights must be positive and non-decreasing in the level")
            object.__setattr__(self, "levels", levels)
        elif self.levels:
            raise ValueError(f"{self.kind.value} norms take no level table")

    # -- constructors ---------------------------------------------------

    @classmethod
    def ratio(cls, alg: FiniteAlgebra | None = None) -> FuzzyNorm:
        return cls._on(NormKind.RATIO, alg)

    @classmethod
    def indicator(cls, alg: FiniteAlgebra | None = None) -> FuzzyNorm:
        return cls._on(NormKind.INDICATOR, alg)

    @classmethod
    def level_family(cls, levels: Sequence[tuple[float, float]], alg: FiniteAlgebra | None = None) -> FuzzyNorm:
        return cls._on(NormKind.LEVELS, alg, tuple(levels))

    @classmethod
    def _on(cls, kind, alg, levels=()):
        if alg is None:
            return cls(kind, 1, None, levels)
        return cls(kind, alg.dim, alg.norms, levels)

    def on(self, alg: FiniteAlgebra | None) -> FuzzyNorm:
        """Same kind and level table over another carrier."""
        return type(self)._on(self.kind, alg, self.levels)

    # -- evaluation -----------------------------------------------------

    def magnitude(self, x) -> np.ndarray:
        coeffs = x.coeffs if isinstance(x, Element) else np.asarray(x, dtype=float)
        if coeffs.shape[-1] != self.carrier_dim:
            raise ValueError(f"element of dimension {coeffs.shape[-1]} does not live in a carrier of dimension {self.carrier_dim}")
        if self.crisp_norm is None:
            return np.abs(coeffs[..., 0]) if self.carrier_dim == 1 else np.sqrt(np.sum(coeffs * coeffs, axis=-1))
        return self.crisp_norm(coeffs)

    def truth(self, r, a):
        """Truth value as a function of crisp magnitude ``r`` and threshold ``a`` (broadcasting)."""
        r = np.asarray(r, dtype=float)
        a = np.asarray(a, dtype=float)
        pos = a > 0
        if self.kind is NormKind.RATIO:
            with np.errstate(invalid="ignore", divide="ignore"):
                val = np.where(np.isinf(r), 0.0, a / (a + r))
        elif self.kind is NormKind.INDICATOR:
            val = (a > r).astype(float)
        else:
            val = np.zeros(np.broadcast(r, a).shape)
            for c, w in self.levels:
                val = np.where(a >= w * r, c, val)
        out = np.where(pos, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def eval(self, x, a):
        return self.truth(self.magnitude(x), a)

    __call__ = eval

    def level_cut(self, x, c: float) -> float:
        """``inf{a > 0 : N(x, a) >= c}``."""
        if not 0.0 < c < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {c}")
        r = float(self.magnitude(x))
        if r == 0.0:
            return 0.0
        if self.kind is NormKind.RATIO:
            return r * c / (1.0 - c)
        if self.kind is NormKind.INDICATOR:
            return r
        candidates = [w * r for lvl, w in self.levels if lvl >= c]
        return min(candidates) if candidates else float("inf")

    def top_level(self) -> float:
        return self.levels[-1][0] if self.kind is NormKind.LEVELS else 1.0

    def lower_probe(self, r: float) -> float:
        """A positive threshold at which a nonzero magnitude ``r`` must read below 1."""
        w = self.levels[0][1] if self.kind is NormKind.LEVELS else 1.0
        return 0.5 * w * r


def eval_norm(norm: FuzzyNorm, x, a):
    return norm.eval(x, a)


def level_cut(norm: FuzzyNorm, x, c: float) -> float:
    return norm.level_cut(x, c)


# -- sample grids -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Finite stand-in for the universal quantifiers over elements and thresholds."""

    algebra: FiniteAlgebra
    points: np.ndarray
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, self.algebra.dim)
        if pts.shape[0] == 0:
            raise ValueError("grid needs at least one point")
        if not np.any(np.all(pts == 0.0, axis=1)):
            raise ValueError("grid points must include the zero element")
        ts = tuple(float(t) for t in self.thresholds)
        if not ts or any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("thresholds must be positive and strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "thresholds", ts)

    def __len__(self):
        return self.points.shape[0]

    def elements(self) -> list[Element]:
        return [Element(p, self.algebra) for p in self.points]

    @property
    def t(self) -> np.ndarray:
        return np.array(self.thresholds)


def default_grid(
    alg: FiniteAlgebra,
    seed: int = 0,
    random_points: int = DEFAULT_RANDOM_POINTS,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> SampleGrid:
    """Zero, basis vectors, pairwise sums ``e_i + e_j`` (``i <= j``) and seeded unit-ball points."""
    m = alg.dim
    eye = np.eye(m)
    iu, ju = np.triu_indices(m)
    sums = eye[iu] + eye[ju]
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(random_points, m))
    norms = alg.norms(raw)
    radii = rng.uniform(0.0, 1.0, size=random_points)
    rand = raw / norms[:, None] * radii[:, None]
    points = np.vstack([np.zeros((1, m)), eye, sums, rand])
    return SampleGrid(alg, points, tuple(thresholds))


# -- axiom checks -------------------------------------------------------------


@dataclass
class AxiomResult:
    axiom: str
    passed: bool
    checked: int
    witness: dict | None = None
    note: str = ""


@dataclass
class AxiomReport:
    results: dict[str, AxiomResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def failures(self) -> list[AxiomResult]:
        return [r for r in self.results.values() if not r.passed]

    def __getitem__(self, axiom: str) -> AxiomResult:
        return self.results[axiom]


def _first(mask: np.ndarray):
    idx = np.argwhere(mask)
    return tuple(int(i) for i in idx[0]) if idx.size else None


def check_axioms(norm: FuzzyNorm, grid: SampleGrid, scalars: Sequence[float] = DEFAULT_SCALARS) -> AxiomReport:
    """Exhaustive check of N1-N5 on the grid; N6 only as monotone consistency."""
    pts = grid.points
    t = grid.t
    r = norm.magnitude(pts)
    vals = norm.truth(r[:, None], t[None, :])
    report = AxiomReport()

    # N1: zero for non-positive thresholds.
    nonpos = np.concatenate([[0.0], -t])
    v1 = norm.truth(r[:, None], nonpos[None, :])
    bad = _first(v1 > SLACK)
    report.results["N1"] = AxiomResult(
        "N1", bad is None, v1.size,
        None if bad is None else {"x": bad[0], "a": float(nonpos[bad[1]])},
    )

    # N2: x = 0 iff N(x, a) = 1 for all a > 0.
    zero = np.all(pts == 0.0, axis=1)
    witness = None
    bad = _first((vals < 1.0 - SLACK) & zero[:, None])
    if bad is not None:
        witness = {"x": bad[0], "a": float(t[bad[1]]), "value": float(vals[bad])}
    else:
        for i in np.flatnonzero(~zero):
            probes = np.append(t, norm.lower_probe(float(r[i])))
            if np.all(norm.truth(r[i], probes) >= 1.0 - SLACK):
                witness = {"x": int(i), "a": None, "value": 1.0}
                break
    report.results["N2"] = AxiomResult("N2", witness is None, vals.size, witness)

    # N3: N(s x, b) = N(x, b / |s|).
    s = np.array([float(v) for v in scalars])
    if s.size:
        if np.any(s == 0):
            raise ValueError("N3 scalars must be nonzero")
        scaled = s[:, None, None] * pts[None, :, :]
        lhs = norm.truth(norm.magnitude(scaled)[:, :, None], t[None, None, :])
        rhs = norm.truth(r[None, :, None], t[None, None, :] / np.abs(s)[:, None, None])
        bad = _first(np.abs(lhs - rhs) > SLACK)
        report.results["N3"] = AxiomResult(
            "N3", bad is None, lhs.size,
            None if bad is None else {"s": float(s[bad[0]]), "x": bad[1], "b": float(t[bad[2]])},
        )
    else:
        report.results["N3"] = AxiomResult("N3", True, 0, None, "vacuous: no scalars supplied")

    # N4: N(x + y, a + b) >= min(N(x, a), N(y, b)).
    sums = pts[:, None, :] + pts[None, :, :]
    rs = norm.magnitude(sums)
    ab = t[:, None] + t[None, :]
    lhs = norm.truth(rs[:, :, None, None], ab[None, None, :, :])
    rhs = np.minimum(vals[:, None, :, None], vals[None, :, None, :])
    bad = _first(lhs < rhs - SLACK)
    report.results["N4"] = AxiomResult(
        "N4", bad is None, lhs.size,
        None if bad is None else {"x": bad[0], "y": bad[1], "a": float(t[bad[2]]), "b": float(t[bad[3]])},
    )

    # N5: non-decreasing in a, and tends to 1.
    bad = _first(np.diff(vals, axis=1) < -SLACK)
    witness = None if bad is None else {"x": bad[0], "a": float(t[bad[1]]), "a_next": float(t[bad[1] + 1])}
    if witness is None:
        far = 1e12 * (1.0 + r * (norm.levels[-1][1] if norm.kind is NormKind.LEVELS else 1.0))
        limit = norm.truth(r, far)
        bad = _first(limit < 1.0 - 1e-9)
        if bad is not None:
            witness = {"x": bad[0], "a": float(far[bad[0]]), "value": float(limit[bad[0]])}
    report.results["N5"] = AxiomResult("N5", witness is None, vals.size + r.size, witness)

    # N6: monotone consistency on the grid refined by right-offset probes.
    refined = np.sort(np.concatenate([t, t * (1.0 + 1e-9)]))
    vr = norm.truth(r[~zero, None], refined[None, :])
    bad = _first(np.diff(vr, axis=1) < -SLACK) if vr.size else None
    report.results["N6"] = AxiomResult(
        "N6", bad is None, vr.size,
        None if bad is None else {"x": int(np.flatnonzero(~zero)[bad[0]]), "a": float(refined[bad[1]])},
        "grid-level only",
    )
    return report


@dataclass
class AlgebraConditionResult:
    passed: bool
    min_slack: float
    violations: int
    checked: int
    witness: dict | None = None

    def __bool__(self):
        return self.passed


def check_algebra_condition(norm: FuzzyNorm, alg: FiniteAlgebra, grid: SampleGrid) -> AlgebraConditionResult:
    """``N(xy, ab) >= min(N(x, a), N(y, b))`` over all grid point and threshold pairs."""
    if norm.carrier_dim != alg.dim or grid.algebra.dim != alg.dim:
        raise ValueError("fuzzy norm, algebra and grid must share a carrier")
    pts = grid.points
    t = grid.t
    r = norm.magnitude(pts)
    vals = norm.truth(r[:, None], t[None, :])
    prods = alg.multiply(pts[:, None, :], pts[None, :, :])
    rp = norm.magnitude(prods)
    ab = t[:, None] * t[None, :]
    lhs = norm.truth(rp[:, :, None, None], ab[None, None, :, :])
    rhs = np.minimum(vals[:, None, :, None], vals[None, :, None, :])
    slack = lhs - rhs
    bad = slack < -SLACK
    worst = np.unravel_index(np.argmin(slack), slack.shape)
    witness = None
    if bad.any():
        i, j, ka, kb = (int(v) for v in worst)
        witness = {
            "x": i, "y": j, "a": float(t[ka]), "b": float(t[kb]),
            "lhs": float(lhs[worst]), "rhs": float(rhs[worst]),
        }
    return AlgebraConditionResult(not bad.any(), float(slack[worst]), int(bad.sum()), slack.size, witness)


# -- fuzzy convergence --------------------------------------------------------


@dataclass
class ConvergenceCheck:
    passed: bool
    worst_value: float
    witness: dict | None = None

    def __bool__(self):
        return self.passed


def _as_coeffs(seq) -> np.ndarray:
    if isinstance(seq, np.ndarray):
        return np.atleast_2d(seq)
    return np.array([s.coeffs if isinstance(s, Element) else s for s in seq], dtype=float)


def _tail_start(n: int) -> int:
    return min(n - 1, (3 * n) // 4)


def fuzzy_limit_check(seq, x, norm: FuzzyNorm, thresholds: Sequence[float], delta: float) -> ConvergenceCheck:
    """Finite-sequence stand-in for ``N(x_n - x, a) -> 1`` at every threshold."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    xs = _as_coeffs(seq)
    if xs.shape[0] == 0:
        raise ValueError("sequence must be nonempty")
    target = x.coeffs if isinstance(x, Element) else np.asarray(x, dtype=float)
    t = np.asarray(thresholds, dtype=float)
    tail = xs[_tail_start(xs.shape[0]):]
    vals = norm.truth(norm.magnitude(tail - target)[:, None], t[None, :])
    last = vals[-1]
    worst = float(np.min(last))
    if np.any(last <= 1.0 - delta):
        k = int(np.argmin(last))
        return ConvergenceCheck(False, worst, {"threshold": float(t[k]), "value": float(last[k])})
    drops = np.diff(vals, axis=0) < -SLACK
    if drops.any():
        n, k = _first(drops)
        return ConvergenceCheck(False, worst, {"tail_index": n, "threshold": float(t[k]), "reason": "not monotone"})
    return ConvergenceCheck(True, worst)


def cauchy_check(seq, norm: FuzzyNorm, thresholds: Sequence[float], delta: float) -> ConvergenceCheck:
    """All tail pairs ``(n, n+p)`` must have ``N(x_{n+p} - x_n, a) > 1 - delta``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    xs = _as_coeffs(seq)
    if xs.shape[0] == 0:
        raise ValueError("sequence must be nonempty")
    tail = xs[_tail_start(xs.shape[0]):]
    t = np.asarray(thresholds, dtype=float)
    if tail.shape[0] < 2:
        return ConvergenceCheck(True, 1.0)
    i, j = np.triu_indices(tail.shape[0], k=1)
    vals = norm.truth(norm.magnitude(tail[j] - tail[i])[:, None], t[None, :])
    worst = float(np.min(vals))
    bad = _first(vals <= 1.0 - delta)
    if bad is not None:
        start = _tail_start(xs.shape[0])
        return ConvergenceCheck(
            False, worst,
            {"n": start + int(i[bad[0]]), "m": start + int(j[bad[0]]), "threshold": float(t[bad[1]])},
        )
    return ConvergenceCheck(True, worst)
