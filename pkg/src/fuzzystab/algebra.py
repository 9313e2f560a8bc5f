"""Finite-dimensional real algebras given by structure constants.

An algebra of dimension ``m`` is a tensor ``c`` of shape ``(m, m, m)`` with
``e_i * e_j = sum_k c[i, j, k] e_k``.  Elements are coefficient vectors.
Most heavy lifting in this package works on stacked coefficient arrays of
shape ``(..., m)``; :class:`Element` is the thin user-facing wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORM_KINDS = ("sup", "euclidean", "operator")

MAX_MATRIX_SIZE = 8
MAX_POLY_DEGREE = 16


class AlgebraMismatch(ValueError):
    """Raised when elements from different algebras are combined."""


@dataclass(frozen=True, eq=False)
class FiniteAlgebra:
    dim: int
    structure_constants: np.ndarray
    norm_kind: str = "sup"
    label: str = "custom"
    _left_regular: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.structure_constants, dtype=float)
        m = int(self.dim)
        if m < 1:
            raise ValueError(f"algebra dimension must be positive, got {self.dim}")
        if c.shape != (m, m, m):
            raise ValueError(f"structure constants must have shape {(m, m, m)}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("structure constants must be finite")
        if self.norm_kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.norm_kind!r}; expected one of {NORM_KINDS}")
        c.setflags(write=False)
        object.__setattr__(self, "dim", m)
        object.__setattr__(self, "structure_constants", c)
        # L[i] is the matrix of y -> e_i * y acting on coefficient columns.
        left = np.transpose(c, (0, 2, 1)).copy()
        left.setflags(write=False)
        object.__setattr__(self, "_left_regular", left)

    # -- batch arithmetic on coefficient arrays -------------------------

    def multiply(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Bilinear product of stacked coefficient arrays (broadcasting)."""
        return np.einsum("...i,...j,ijk->...k", x, y, self.structure_constants)

    def left_regular(self, x: np.ndarray) -> np.ndarray:
        """Matrices of ``y -> x*y``; shape ``(..., m, m)``."""
        return np.einsum("...i,ikj->...kj", x, self._left_regular)

    def norms(self, x: np.ndarray) -> np.ndarray:
        """Crisp norms of stacked coefficient vectors, shape ``x.shape[:-1]``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise AlgebraMismatch(f"expected coefficient vectors of length {self.dim}, got {x.shape[-1]}")
        if self.norm_kind == "sup":
            return np.max(np.abs(x), axis=-1)
        if self.norm_kind == "euclidean":
            return np.sqrt(np.sum(x * x, axis=-1))
        return operator_norms(self.left_regular(x))

    # -- conveniences ---------------------------------------------------

    def element(self, coeffs) -> Element:
        return Element(coeffs, self)

    def zero(self) -> Element:
        return Element(np.zeros(self.dim), self)

    def basis(self) -> list[Element]:
        return [Element(row, self) for row in np.eye(self.dim)]

    def compatible(self, other: FiniteAlgebra) -> bool:
        if other is self:
            return True
        return (
            other.dim == self.dim
            and other.norm_kind == self.norm_kind
            and np.array_equal(other.structure_constants, self.structure_constants)
        )

    def with_norm(self, norm_kind: str) -> FiniteAlgebra:
        return FiniteAlgebra(self.dim, self.structure_constants, norm_kind, self.label)


def operator_norms(mats: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of square matrices.

    The largest eigenvalue of the Gram matrix ``M^T M`` comes from LAPACK's
    symmetric solver, which stays accurate when the top singular values cluster
    (plain power iteration does not).
    """
    mats = np.asarray(mats, dtype=float)
    batch_shape = mats.shape[:-2]
    n = mats.shape[-1]
    flat = mats.reshape((-1, n, n))
    if flat.shape[0] == 0:
        return np.zeros(batch_shape)
    gram = np.einsum("bki,bkj->bij", flat, flat)
    top = np.linalg.eigvalsh(gram)[:, -1]
    return np.sqrt(np.maximum(top, 0.0)).reshape(batch_shape)


class Element:
    """An element of a :class:`FiniteAlgebra`: a read-only coefficient vector."""

    __slots__ = ("coeffs", "algebra")

    def __init__(self, coeffs, algebra: FiniteAlgebra):
        arr = np.array(coeffs, dtype=float).reshape(-1)
        if arr.shape[0] != algebra.dim:
            raise AlgebraMismatch(f"element has {arr.shape[0]} coefficients, algebra {algebra.label!r} has dim {algebra.dim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("element coefficients must be finite")
        arr.setflags(write=False)
        self.coeffs = arr
        self.algebra = algebra

    def _check(self, other: Element):
        if not isinstance(other, Element):
            return NotImplemented
        if not self.algebra.compatible(other.algebra):
            raise AlgebraMismatch(f"cannot combine elements of {self.algebra.label!r} and {other.algebra.label!r}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Element(self.coeffs + other.coeffs, self.algebra)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Element(self.coeffs - other.coeffs, self.algebra)

    def __neg__(self):
        return Element(-self.coeffs, self.algebra)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Element(float(other) * self.coeffs, self.algebra)
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Element(self.algebra.multiply(self.coeffs, other.coeffs), self.algebra)

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Element(float(other) * self.coeffs, self.algebra)
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.algebra.compatible(other.algebra) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.algebra.dim, self.coeffs.tobytes()))

    def __repr__(self):
        return f"Element({self.coeffs.tolist()}, {self.algebra.label})"

    def norm(self) -> float:
        return crisp_norm(self)


def add(x: Element, y: Element) -> Element:
    return x + y


def scale(s: float, x: Element) -> Element:
    return float(s) * x


def mul(x: Element, y: Element) -> Element:
    return x * y


def crisp_norm(x: Element) -> float:
    return float(x.algebra.norms(x.coeffs))


# -- constructors ---------------------------------------------------------


def make_matrix_algebra(k: int, norm_kind: str = "sup") -> FiniteAlgebra:
    """Full ``k x k`` real matrix algebra on the matrix units ``E_ij`` (index ``i*k + j``)."""
    if not 1 <= k <= MAX_MATRIX_SIZE:
        raise ValueError(f"matrix size must be in 1..{MAX_MATRIX_SIZE}, got {k}")
    m = k * k
    c = np.zeros((m, m, m))
    for i in range(k):
        for j in range(k):
            for l in range(k):
                # E_ij E_jl = E_il
                c[i * k + j, j * k + l, i * k + l] = 1.0
    label = "real" if k == 1 else f"matrix:{k}"
    return FiniteAlgebra(m, c, norm_kind, label)


def make_poly_trunc_algebra(deg: int, norm_kind: str = "sup") -> FiniteAlgebra:
    """Truncated polynomials ``R[t]/(t^(deg+1))`` on the monomial basis."""
    if not 1 <= deg <= MAX_POLY_DEGREE:
        raise ValueError(f"degree must be in 1..{MAX_POLY_DEGREE}, got {deg}")
    m = deg + 1
    c = np.zeros((m, m, m))
    for i in range(m):
        for j in range(m - i):
            c[i, j, i + j] = 1.0
    return FiniteAlgebra(m, c, norm_kind, f"poly:{deg}")


def make_real_algebra(norm_kind: str = "sup") -> FiniteAlgebra:
    return make_matrix_algebra(1, norm_kind)


def algebra_from_name(name: str, norm_kind: str = "sup") -> FiniteAlgebra:
    """Build ``real``, ``matrix:<k>`` or ``poly:<deg>``."""
    kind, _, size = name.partition(":")
    if kind == "real" and not size:
        return make_real_algebra(norm_kind)
    if kind in ("matrix", "poly") and size:
        try:
            n = int(size)
        except ValueError:
            raise ValueError(f"bad algebra size in {name!r}") from None
        if kind == "matrix":
            return make_matrix_algebra(n, norm_kind)
        return make_poly_trunc_algebra(n, norm_kind)
    raise ValueError(f"unknown algebra {name!r}; expected 'real', 'matrix:<k>' or 'poly:<deg>'")


def check_associativity(alg: FiniteAlgebra) -> float:
    """Max crisp norm of ``(e_i e_j) e_k - e_i (e_j e_k)`` over basis triples."""
    c = alg.structure_constants
    left = np.einsum("ijl,lkn->ijkn", c, c)
    right = np.einsum("jkl,iln->ijkn", c, c)
    return float(np.max(alg.norms(left - right)))


def submultiplicativity_constant(alg: FiniteAlgebra) -> float:
    """Max of ``||e_i e_j|| / (||e_i|| ||e_j||)`` over basis pairs."""
    basis = np.eye(alg.dim)
    prods = alg.multiply(basis[:, None, :], basis[None, :, :])
    n = alg.norms(basis)
    return float(np.max(alg.norms(prods) / np.outer(n, n)))
