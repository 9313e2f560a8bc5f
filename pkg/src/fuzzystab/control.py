"""Control functions and seeded approximate homomorphisms/derivations.

A control function is kept as a crisp magnitude ``phi(a, b)`` plus the fuzzy
norm ``N'`` it is read through; ``N'(phi(a, b), t)`` is all the theorems ever
look at.  An approximate map is ``f = h0 + eta`` with ``h0`` an exact linear
homomorphism or derivation and ``eta`` a deterministic perturbation whose
crisp size is ``min(noise_scale, phi(a, a) / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .algebra import Element, FiniteAlgebra
from .fuzzy_norm import SLACK, FuzzyNorm, SampleGrid

CONSTANT = "constant"
POWERSUM = "powersum"
HOMOMORPHISM = "homomorphism"
DERIVATION = "derivation"
HASHED = "hashed"
ALIGNED = "aligned"

MAX_RETRIES = 8


class ControlError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlFunction:
    kind: str
    eps: float
    codomain_norm: FuzzyNorm
    p: float | None = None
    alpha: float | None = None
    superlinear: bool = False

    def __post_init__(self):
        if not self.eps > 0 or not math.isfinite(self.eps):
            raise ControlError(f"eps must be a positive real, got {self.eps}")
        if self.kind == CONSTANT:
            if self.superlinear:
                raise ControlError("reverse (superlinear) iteration needs a power-sum control with p > 1")
            alpha = 1.0 if self.alpha is None else float(self.alpha)
            if not 1.0 <= alpha < 2.0:
                raise ControlError(f"constant control needs alpha in [1, 2) (0<alpha<2), got {alpha}")
        elif self.kind == POWERSUM:
            if self.p is None or not math.isfinite(self.p):
                raise ControlError("power-sum control needs a finite exponent p")
            p = float(self.p)
            alpha = 2.0**p
            if self.alpha is not None and abs(float(self.alpha) - alpha) > 1e-12 * alpha:
                raise ControlError(f"power-sum control has alpha = 2^p = {alpha!r}, got {self.alpha}")
            if p == 1.0:
                raise ControlError("p = 1 admits no stability bound in either direction")
            if self.superlinear and p < 1.0:
                raise ControlError("reverse (superlinear) iteration needs p > 1")
            if not self.superlinear and not 0.0 < alpha < 2.0:
                raise ControlError(f"scaling factor must satisfy 0<alpha<2; p = {p} gives alpha = {alpha}")
            object.__setattr__(self, "p", p)
        else:
            raise ControlError(f"unknown control kind {self.kind!r}; expected 'constant' or 'powersum'")
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "alpha", alpha)

    def phi(self, ra, rb):
        """phi as a function of the crisp norms of its two arguments (broadcasting)."""
        ra = np.asarray(ra, dtype=float)
        rb = np.asarray(rb, dtype=float)
        if self.kind == CONSTANT:
            out = np.full(np.broadcast(ra, rb).shape, self.eps)
        elif self.p < 0:
            with np.errstate(divide="ignore"):
                out = np.where((ra == 0) | (rb == 0), np.inf, self.eps * (ra**self.p + rb**self.p))
        else:
            out = self.eps * (ra**self.p + rb**self.p)
        return float(out) if out.ndim == 0 else out

    def bound_factor(self) -> float:
        """Multiplier turning ``phi(a, a)`` into the stability threshold."""
        if self.superlinear:
            return 2.0 / (self.alpha - 2.0)
        return 2.0 / (2.0 - self.alpha)


def constant_control(eps: float, codomain_norm: FuzzyNorm | None = None, alpha: float = 1.0) -> ControlFunction:
    return ControlFunction(CONSTANT, eps, codomain_norm or FuzzyNorm.ratio(), alpha=alpha)


def powersum_control(eps: float, p: float, codomain_norm: FuzzyNorm | None = None, superlinear: bool = False) -> ControlFunction:
    return ControlFunction(POWERSUM, eps, codomain_norm or FuzzyNorm.ratio(), p=p, superlinear=superlinear)


def phi_magnitude(ctrl: ControlFunction, a: Element, b: Element) -> float:
    return ctrl.phi(a.algebra.norms(a.coeffs), b.algebra.norms(b.coeffs))


# -- scaling hypothesis -----------------------------------------------------


@dataclass
class ScalingResult:
    passed: bool
    crisp_passed: bool
    fuzzy_passed: bool
    min_slack: float
    witness: dict | None
    phi_scaled: np.ndarray
    phi_bound: np.ndarray

    def __bool__(self):
        return self.passed


def check_scaling(ctrl: ControlFunction, grid: SampleGrid) -> ScalingResult:
    """``N'(phi(2a, 2b), t) >= N'(alpha phi(a, b), t)`` on grid pairs.

    Reverse controls are checked in the halving form
    ``phi(a/2, b/2) <= phi(a, b) / alpha``.
    """
    r = grid.algebra.norms(grid.points)
    factor = 0.5 if ctrl.superlinear else 2.0
    lhs = ctrl.phi(factor * r[:, None], factor * r[None, :])
    base = ctrl.phi(r[:, None], r[None, :])
    rhs = base / ctrl.alpha if ctrl.superlinear else ctrl.alpha * base
    finite = np.isfinite(lhs) & np.isfinite(rhs)
    slack = np.where(finite, rhs - lhs, 0.0)
    crisp_bad = finite & (lhs > rhs + SLACK * np.maximum(1.0, rhs))
    t = grid.t
    n = ctrl.codomain_norm
    fl = n.truth(lhs[:, :, None], t)
    fr = n.truth(rhs[:, :, None], t)
    fuzzy_bad = fl < fr - SLACK
    witness = None
    if crisp_bad.any() or fuzzy_bad.any():
        i, j = np.argwhere(crisp_bad | fuzzy_bad.any(axis=-1))[0]
        witness = {"a": int(i), "b": int(j), "lhs": float(lhs[i, j]), "rhs": float(rhs[i, j])}
    return ScalingResult(
        not crisp_bad.any() and not fuzzy_bad.any(),
        not crisp_bad.any(),
        not fuzzy_bad.any(),
        float(np.min(slack)),
        witness,
        lhs,
        rhs,
    )


# -- exact base maps ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear map between algebras, as a matrix acting on coefficient vectors."""

    matrix: np.ndarray
    domain: FiniteAlgebra
    codomain: FiniteAlgebra
    label: str = "linear"

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.shape != (self.codomain.dim, self.domain.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match {self.codomain.dim}x{self.domain.dim}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.matrix.T

    def __call__(self, a: Element) -> Element:
        return Element(self.evaluate(a.coeffs), self.codomain)


def identity_map(alg: FiniteAlgebra) -> LinearMap:
    return LinearMap(np.eye(alg.dim), alg, alg, "identity")


def zero_map(domain: FiniteAlgebra, codomain: FiniteAlgebra | None = None) -> LinearMap:
    codomain = codomain or domain
    return LinearMap(np.zeros((codomain.dim, domain.dim)), domain, codomain, "zero")


def _matrix_size(alg: FiniteAlgebra) -> int:
    k = math.isqrt(alg.dim)
    if alg.label not in ("real", f"matrix:{k}") or k * k != alg.dim:
        raise ValueError(f"{alg.label!r} is not a full matrix algebra")
    return k


def conjugation_map(alg: FiniteAlgebra) -> LinearMap:
    """``X -> P X P^-1`` with ``P`` unipotent (ones on the diagonal and superdiagonal)."""
    k = _matrix_size(alg)
    p = np.eye(k) + np.eye(k, k=1)
    nil = np.eye(k, k=1)
    p_inv = sum(np.linalg.matrix_power(-nil, j) for j in range(k))
    cols = []
    for idx in range(alg.dim):
        unit = np.zeros(alg.dim)
        unit[idx] = 1.0
        cols.append((p @ unit.reshape(k, k) @ p_inv).reshape(-1))
    return LinearMap(np.array(cols).T, alg, alg, "conjugation")


def inner_derivation(alg: FiniteAlgebra, q=None) -> LinearMap:
    """``x -> q x - x q``; ``q`` defaults to ``sum_i (i + 1) e_i``."""
    q = np.arange(1.0, alg.dim + 1.0) if q is None else np.asarray(q.coeffs if isinstance(q, Element) else q, dtype=float)
    eye = np.eye(alg.dim)
    images = alg.multiply(q[None, :], eye) - alg.multiply(eye, q[None, :])
    return LinearMap(images.T, alg, alg, "inner")


def euler_derivation(alg: FiniteAlgebra) -> LinearMap:
    """``t d/dt`` on truncated polynomials: ``t^k -> k t^k``."""
    if not alg.label.startswith("poly:"):
        raise ValueError(f"the Euler derivation needs a truncated polynomial algebra, got {alg.label!r}")
    return LinearMap(np.diag(np.arange(alg.dim, dtype=float)), alg, alg, "euler")


BASE_MAPS = {
    HOMOMORPHISM: {"identity": identity_map, "zero": zero_map, "conjugation": conjugation_map},
    DERIVATION: {"zero": zero_map, "inner": inner_derivation, "euler": euler_derivation},
}


def base_map_from_name(name: str, alg: FiniteAlgebra, mode: str) -> LinearMap:
    try:
        maker = BASE_MAPS[mode][name]
    except KeyError:
        choices = sorted(BASE_MAPS.get(mode, {}))
        raise ValueError(f"unknown base map {name!r} for mode {mode!r}; expected one of {choices}") from None
    return maker(alg)


# -- seeded perturbation --------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hashed_directions(seed: int, coeffs: np.ndarray, out_dim: int) -> np.ndarray:
    """Uniform values in ``[-1, 1)^out_dim`` keyed by ``seed`` and the exact bits of each row."""
    x = np.ascontiguousarray(np.asarray(coeffs, dtype=float) + 0.0)
    bits = x.view(np.uint64)
    h = np.full(x.shape[:-1], np.uint64(seed % 2**64), dtype=np.uint64)
    h = _splitmix(h)
    for j in range(x.shape[-1]):
        h = _splitmix(h ^ bits[..., j])
    cols = [_splitmix(h ^ np.uint64(0xD1B54A32D192ED03 * (k + 1) % 2**64)) for k in range(out_dim)]
    u = np.stack(cols, axis=-1) >> np.uint64(11)
    return u.astype(float) * 2.0**-52 - 1.0


@dataclass(frozen=True, eq=False)
class ApproximateMap:
    base: LinearMap
    control: ControlFunction
    noise_seed: int = 0
    noise_scale: float = 0.0
    mode: str = HOMOMORPHISM
    profile: str = HASHED

    def __post_init__(self):
        if self.mode not in (HOMOMORPHISM, DERIVATION):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == DERIVATION and self.base.domain is not self.base.codomain and not self.base.domain.compatible(self.base.codomain):
            raise ValueError("a derivation maps an algebra into itself")
        if self.profile not in (HASHED, ALIGNED):
            raise ValueError(f"unknown perturbation profile {self.profile!r}")
        if not self.noise_scale >= 0:
            raise ValueError("noise_scale must be nonnegative")

    @property
    def domain(self) -> FiniteAlgebra:
        return self.base.domain

    @property
    def codomain(self) -> FiniteAlgebra:
        return self.base.codomain

    def noise_size(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        nonzero = np.any(coeffs != 0, axis=-1)
        if self.control.kind == CONSTANT:
            # phi ignores the norms, and a norm vanishes only at zero.
            budget = np.full(nonzero.shape, 0.5 * self.control.phi(1.0, 1.0))
        else:
            r = self.domain.norms(coeffs)
            budget = 0.5 * self.control.phi(r, r)
        size = np.minimum(self.noise_scale, budget)
        return np.where(nonzero, size, 0.0)

    def noise(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        size = self.noise_size(coeffs)
        cod = self.codomain
        if self.profile == ALIGNED:
            ones = np.ones(cod.dim)
            u = np.broadcast_to(ones / cod.norms(ones), coeffs.shape[:-1] + (cod.dim,))
        else:
            v = hashed_directions(self.noise_seed, coeffs, cod.dim)
            nv = cod.norms(v)
            fallback = np.zeros(cod.dim)
            fallback[0] = 1.0
            u = np.where(nv[..., None] > 0, v / np.where(nv > 0, nv, 1.0)[..., None], fallback / cod.norms(fallback))
        return np.where(size[..., None] > 0, size[..., None] * u, 0.0)

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        return self.base.evaluate(coeffs) + self.noise(coeffs)

    def realize(self, a: Element) -> Element:
        if not self.domain.compatible(a.algebra):
            raise ValueError("element is not in the domain of the map")
        return Element(self.evaluate(a.coeffs), self.codomain)

    __call__ = realize


def realize(f: ApproximateMap, a: Element) -> Element:
    return f.realize(a)


# -- defect domination ------------------------------------------------------------


def product_defect(f, alg_dom: FiniteAlgebra, alg_cod: FiniteAlgebra, mode: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``f(ab) - f(a) f(b)`` (homomorphism) or ``f(ab) - a f(b) - f(a) b`` (derivation)."""
    fab = f.evaluate(alg_dom.multiply(a, b))
    fa = f.evaluate(a)
    fb = f.evaluate(b)
    if mode == HOMOMORPHISM:
        return fab - alg_cod.multiply(fa, fb)
    return fab - alg_dom.multiply(a, fb) - alg_dom.multiply(fa, b)


def additive_defect(f, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return f.evaluate(a + b) - f.evaluate(a) - f.evaluate(b)


@dataclass
class DominationResult:
    passed: bool
    crisp_passed: bool
    fuzzy_passed: bool
    noise_scale: float
    attempts: int
    witness: dict | None
    phi: np.ndarray
    additive: np.ndarray
    product: np.ndarray

    def __bool__(self):
        return self.passed

    @property
    def min_margin(self) -> float:
        margin = self.phi - np.maximum(self.additive, self.product)
        return float(np.min(margin))


def certify_defect_domination(f: ApproximateMap, grid: SampleGrid, norm: FuzzyNorm | None = None) -> DominationResult:
    """Check the additive and product hypotheses of the stability theorems on grid pairs.

    ``norm`` is the fuzzy norm on the codomain algebra; by default the control's
    codomain kind carried over to it.
    """
    norm = norm or f.control.codomain_norm.on(f.codomain)
    pts = grid.points
    a = np.repeat(pts[:, None, :], len(pts), axis=1)
    b = np.repeat(pts[None, :, :], len(pts), axis=0)
    r = f.domain.norms(pts)
    phi = f.control.phi(r[:, None], r[None, :])
    add = additive_defect(f, a, b)
    prod = product_defect(f, f.domain, f.codomain, f.mode, a, b)
    add_n = f.codomain.norms(add)
    prod_n = f.codomain.norms(prod)
    tol = SLACK * np.maximum(1.0, np.where(np.isfinite(phi), phi, 1.0))
    crisp_bad = (add_n > phi + tol) | (prod_n > phi + tol)
    t = grid.t
    rhs = f.control.codomain_norm.truth(phi[:, :, None], t)
    fuzzy_bad = (
        (norm.truth(add_n[:, :, None], t) < rhs - SLACK) | (norm.truth(prod_n[:, :, None], t) < rhs - SLACK)
    ).any(axis=-1)
    witness = None
    if crisp_bad.any() or fuzzy_bad.any():
        i, j = np.argwhere(crisp_bad | fuzzy_bad)[0]
        witness = {
            "a": int(i), "b": int(j), "phi": float(phi[i, j]),
            "additive": float(add_n[i, j]), "product": float(prod_n[i, j]),
        }
    return DominationResult(
        not crisp_bad.any() and not fuzzy_bad.any(),
        not crisp_bad.any(),
        not fuzzy_bad.any(),
        f.noise_scale,
        1,
        witness,
        phi,
        add_n,
        prod_n,
    )


def build_approximate_map(
    base: LinearMap,
    control: ControlFunction,
    grid: SampleGrid,
    *,
    noise_seed: int = 0,
    noise_scale: float = 0.0,
    mode: str = HOMOMORPHISM,
    profile: str = HASHED,
    norm: FuzzyNorm | None = None,
    max_retries: int = MAX_RETRIES,
) -> tuple[ApproximateMap, DominationResult]:
    """Construct ``f`` and certify it on ``grid``, halving ``noise_scale`` on failure.

    The returned result is the last certification; it may still be failing
    after ``max_retries`` halvings.
    """
    f = ApproximateMap(base, control, noise_seed, noise_scale, mode, profile)
    result = certify_defect_domination(f, grid, norm)
    attempts = 1
    while not result.passed and attempts <= max_retries:
        scale = f.noise_scale
        if math.isinf(scale):
            # An unbounded budget cannot be halved; start from the largest size actually used.
            pts = grid.points
            probes = np.concatenate([pts, (pts[:, None] + pts[None]).reshape(-1, pts.shape[1])])
            scale = float(np.max(f.noise_size(probes)))
        f = replace(f, noise_scale=scale / 2.0)
        result = certify_defect_domination(f, grid, norm)
        attempts += 1
    result.attempts = attempts
    return f, result
