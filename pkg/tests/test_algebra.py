import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fuzzystab.algebra import (
    AlgebraMismatch,
    Element,
    FiniteAlgebra,
    add,
    algebra_from_name,
    check_associativity,
    crisp_norm,
    make_matrix_algebra,
    make_poly_trunc_algebra,
    make_real_algebra,
    mul,
    operator_norms,
    scale,
    submultiplicativity_constant,
)

from .conftest import unit

coeff = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vectors(dim):
    return arrays(np.float64, dim, elements=coeff)


def as_matrix(x, k):
    return np.asarray(x.coeffs).reshape(k, k)


# -- oracles -----------------------------------------------------------------


def test_matrix_unit_is_idempotent(m2):
    e11 = unit(m2, 0)
    assert mul(e11, e11) == e11


def test_matrix_units_multiply_like_matrices(m2):
    e11, e12 = unit(m2, 0), unit(m2, 1)
    assert mul(e11, e12) == e12
    assert mul(e12, e11) == m2.zero()


def test_add_zero_is_identity(m2):
    x = m2.element([1.5, -2.0, 0.25, 3.0])
    assert add(x, m2.zero()) == x


def test_truncated_polynomial_products(poly2):
    t, t2 = unit(poly2, 1), unit(poly2, 2)
    assert mul(t, t) == t2
    assert mul(t2, t) == poly2.zero()


def test_sup_norm_of_small_vector():
    alg = FiniteAlgebra(2, np.zeros((2, 2, 2)), "sup")
    assert crisp_norm(alg.element([3.0, -4.0])) == 4.0
    assert crisp_norm(alg.zero()) == 0.0


def test_euclidean_norm():
    alg = FiniteAlgebra(2, np.zeros((2, 2, 2)), "euclidean")
    assert crisp_norm(alg.element([3.0, -4.0])) == pytest.approx(5.0)


def test_operator_norm_of_matrix_unit(m2_op):
    assert crisp_norm(unit(m2_op, 0)) == pytest.approx(1.0, abs=1e-12)


def test_real_algebra_constants():
    r = make_matrix_algebra(1)
    assert r.dim == 1 and r.structure_constants[0, 0, 0] == 1.0
    assert r.label == "real"
    assert make_real_algebra().compatible(r)


def test_small_algebra_shapes():
    assert make_matrix_algebra(2).dim == 4
    assert make_poly_trunc_algebra(2).dim == 3


@pytest.mark.parametrize("alg", [make_matrix_algebra(2), make_matrix_algebra(3), make_poly_trunc_algebra(2), make_poly_trunc_algebra(5)])
def test_builtin_algebras_are_associative(alg):
    assert check_associativity(alg) == 0.0


def test_corrupted_constants_break_associativity(m2):
    c = m2.structure_constants.copy()
    c[0, 1, 1] += 0.01
    assert check_associativity(FiniteAlgebra(4, c)) >= 0.009


def test_operator_norm_is_submultiplicative(m2_op, poly2_op):
    assert submultiplicativity_constant(m2_op) <= 1.0 + 1e-12
    assert submultiplicativity_constant(poly2_op) <= 1.0 + 1e-12


def test_sup_norm_is_not_submultiplicative_on_polynomials(poly2):
    one_plus_t = poly2.element([1.0, 1.0, 0.0])
    assert crisp_norm(one_plus_t * one_plus_t) == 2.0


def test_operator_norms_match_svd_on_clustered_spectra():
    # Close top singular values defeat plain power iteration; the result must still be exact.
    rng = np.random.default_rng(4)
    mats = rng.normal(size=(500, 3, 3))
    u, _, vt = np.linalg.svd(mats)
    s = np.array([1.0, 1.0 - 1e-9, 0.3])
    close = np.einsum("bij,j,bjk->bik", u, s, vt)
    assert np.allclose(operator_norms(close), 1.0, rtol=1e-13, atol=0)
    assert np.allclose(operator_norms(mats), np.linalg.norm(mats, 2, axis=(-2, -1)), rtol=1e-13)


def test_operator_norm_of_empty_batch():
    assert operator_norms(np.zeros((0, 2, 2))).shape == (0,)


# -- validation ----------------------------------------------------------------


def test_rejects_bad_shapes_and_kinds():
    with pytest.raises(ValueError):
        FiniteAlgebra(2, np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        FiniteAlgebra(1, np.ones((1, 1, 1)), "frobenius")
    with pytest.raises(ValueError):
        FiniteAlgebra(1, np.array([[[np.nan]]]))


def test_size_limits():
    with pytest.raises(ValueError):
        make_matrix_algebra(9)
    with pytest.raises(ValueError):
        make_poly_trunc_algebra(17)
    with pytest.raises(ValueError):
        make_poly_trunc_algebra(0)


def test_structure_constants_are_read_only(m2):
    with pytest.raises(ValueError):
        m2.structure_constants[0, 0, 0] = 5.0


def test_mixing_algebras_raises(m2, poly2):
    with pytest.raises(AlgebraMismatch):
        unit(m2, 0) + unit(poly2, 0)
    with pytest.raises(AlgebraMismatch):
        Element([1.0, 2.0], m2)


def test_algebra_names():
    assert algebra_from_name("real").dim == 1
    assert algebra_from_name("matrix:3").dim == 9
    assert algebra_from_name("poly:4", "operator").norm_kind == "operator"
    for bad in ("quaternion", "matrix:", "poly:x", "real:2"):
        with pytest.raises(ValueError):
            algebra_from_name(bad)


# -- algebraic laws ------------------------------------------------------------


@given(vectors(4), vectors(4))
def test_matrix_product_matches_numpy(x, y):
    alg = make_matrix_algebra(2)
    ex, ey = alg.element(x), alg.element(y)
    assert np.allclose(as_matrix(ex * ey, 2), x.reshape(2, 2) @ y.reshape(2, 2))


@given(vectors(3), vectors(3), vectors(3))
def test_polynomial_product_laws(x, y, z):
    alg = make_poly_trunc_algebra(2)
    a, b, c = alg.element(x), alg.element(y), alg.element(z)
    assert np.allclose((a * b).coeffs, (b * a).coeffs)
    assert np.allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs, atol=1e-9)
    assert np.allclose((a * (b + c)).coeffs, (a * b + a * c).coeffs, atol=1e-9)


@given(vectors(4), vectors(4), st.sampled_from(["sup", "euclidean", "operator"]))
def test_norm_is_a_norm(x, y, kind):
    alg = make_matrix_algebra(2, kind)
    a, b = alg.element(x), alg.element(y)
    tol = 1e-12 * (1 + a.norm() + b.norm())
    assert (a + b).norm() <= a.norm() + b.norm() + tol
    assert scale(-2.5, a).norm() == pytest.approx(2.5 * a.norm(), rel=1e-12, abs=1e-300)
    assert (a.norm() == 0) == (not np.any(x))


@given(vectors(4), vectors(4))
def test_operator_norm_submultiplicative_on_samples(x, y):
    alg = make_matrix_algebra(2, "operator")
    a, b = alg.element(x), alg.element(y)
    assert (a * b).norm() <= a.norm() * b.norm() * (1 + 1e-12) + 1e-300


@given(vectors(4))
def test_operator_norm_matches_matrix_two_norm(x):
    # The left-regular representation of a 2x2 matrix is a block copy of it.
    alg = make_matrix_algebra(2, "operator")
    assert alg.element(x).norm() == pytest.approx(np.linalg.norm(x.reshape(2, 2), 2), rel=1e-12, abs=1e-12)
