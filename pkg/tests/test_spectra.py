from fractions import Fraction

import numpy as np
import pytest
from scipy.special import eval_hermitenorm, eval_legendre

from polydiff import catalog
from polydiff.errors import UnsupportedFamily
from polydiff.measure import exact_moments, model_moments
from polydiff.spectra import (
    eigen_blocks,
    heat_kernel,
    operator_matrix,
    orthonormalize,
    reproducing_kernel_oracle,
    spectrum_report,
)


@pytest.mark.parametrize("a, b", [(1, 1), (Fraction(1, 2), Fraction(1, 2)), (2, 3), (Fraction(7, 3), 1)])
def test_jacobi_spectrum(a, b):
    m = catalog.get_model("jacobi", a=a, b=b)
    got = eigen_blocks(m, 20).exact_eigenvalues
    s = Fraction(a) + Fraction(b)
    assert got == sorted((-k * (k + s - 1) for k in range(21)), reverse=True)


@pytest.mark.parametrize("name, params", [("hermite", {}), ("laguerre", {"a": 3})])
def test_unit_gap_spectra(name, params):
    got = eigen_blocks(catalog.get_model(name, **params), 20).exact_eigenvalues
    assert got == [Fraction(-k) for k in range(21)]


def test_operator_matrix_is_upper_triangular_in_one_dimension():
    A = operator_matrix(catalog.get_model("jacobi"), 6).float_matrix()
    assert np.allclose(np.tril(A, -1), 0)


def test_legendre_eigenpolynomials():
    block = eigen_blocks(catalog.get_model("jacobi", a=1, b=1), 6)
    xs = np.linspace(-0.9, 0.9, 7)
    vals = block.evaluate_basis(xs[:, None]) @ block.eigenvectors
    for k in range(7):
        ref = eval_legendre(k, xs)
        c = np.dot(vals[:, k], ref) / np.dot(ref, ref)
        assert np.allclose(vals[:, k], c * ref, atol=1e-10)


def test_hermite_eigenpolynomials():
    block = eigen_blocks(catalog.get_model("hermite"), 5)
    xs = np.linspace(-2, 2, 9)
    vals = block.evaluate_basis(xs[:, None]) @ block.eigenvectors
    for k in range(6):
        ref = eval_hermitenorm(k, xs)
        c = np.dot(vals[:, k], ref) / np.dot(ref, ref)
        assert np.allclose(vals[:, k], c * ref, atol=1e-10)


def test_triangle_levels():
    # uniform measure on the triangle: eigenvalue -k(k+2) on level k, multiplicity k+1
    block = eigen_blocks(catalog.get_model("triangle"), 4)
    for k in range(5):
        vals = block.eigenvalues[np.array(block.levels) == k]
        assert len(vals) == k + 1
        assert np.allclose(vals, -k * (k + 2))


def test_sliced_sphere_weighted_levels():
    block = eigen_blocks(catalog.get_model("sliced_sphere", n=2), 4)
    assert np.allclose(sorted(block.eigenvalues, reverse=True), [0, -2, -6, -6, -12, -12, -20, -20, -20])


def test_relations_rejected():
    with pytest.raises(UnsupportedFamily):
        eigen_blocks(catalog.sphere_model(3), 2)


def test_triangle_orthogonality_exact():
    m = catalog.get_model("triangle", r=(Fraction(1, 2), 0, 1))
    block = eigen_blocks(m, 4)
    mom = model_moments(m, 8)
    assert mom.method == "EXACT"
    assert orthonormalize(block, mom).cross_residual < 1e-10


def test_orthonormal_gram():
    m = catalog.get_model("square")
    mom = model_moments(m, 6)
    ob = orthonormalize(eigen_blocks(m, 3), mom)
    from polydiff.spectra import moment_matrix

    G = ob.coefficients.T @ moment_matrix(ob.basis, mom) @ ob.coefficients
    assert np.allclose(G, np.eye(len(G)), atol=1e-10)


class TestHeatKernel:
    def test_legendre_series(self):
        block = eigen_blocks(catalog.get_model("jacobi", a=1, b=1), 14)
        mom = exact_moments("interval-beta", {"a": 1, "b": 1}, 28)
        ob = orthonormalize(block, mom)
        t, x, y = 0.4, 0.3, -0.6
        ref = sum(np.exp(-k * (k + 1) * t) * (2 * k + 1) * eval_legendre(k, x) * eval_legendre(k, y)
                  for k in range(15))
        hk = heat_kernel(block, ob, t, [x], [y], moments=mom)
        assert abs(hk.value - ref) < 1e-9
        assert hk.positive

    def test_mehler(self):
        block = eigen_blocks(catalog.get_model("hermite"), 30)
        mom = exact_moments("gaussian", {}, 60)
        ob = orthonormalize(block, mom)
        t, x, y = 1.0, 0.5, -0.3
        q = np.exp(-t)
        ref = np.exp(-(q * q * (x * x + y * y) - 2 * q * x * y) / (2 * (1 - q * q))) / np.sqrt(1 - q * q)
        hk = heat_kernel(block, ob, t, [x], [y], moments=mom)
        assert abs(hk.value - ref) < 1e-8
        assert abs(hk.normalization - 1) < 1e-10

    def test_symmetry_and_tail(self):
        block = eigen_blocks(catalog.get_model("jacobi", a=2, b=1), 12)
        mom = exact_moments("interval-beta", {"a": 2, "b": 1}, 24)
        ob = orthonormalize(block, mom)
        k1 = heat_kernel(block, ob, 0.5, [0.2], [0.7])
        k2 = heat_kernel(block, ob, 0.5, [0.7], [0.2])
        assert abs(k1.value - k2.value) < 1e-12
        assert 0 <= k1.tail_bound < 1e-10
        assert abs(k1.value - reproducing_kernel_oracle(block, mom, 0.5, [0.2], [0.7])) < 1e-6

    def test_bad_time(self):
        block = eigen_blocks(catalog.get_model("hermite"), 4)
        ob = orthonormalize(block, exact_moments("gaussian", {}, 8))
        with pytest.raises(ValueError):
            heat_kernel(block, ob, 0.0, [0.0], [0.0])


def test_report():
    rep = spectrum_report(eigen_blocks(catalog.get_model("laguerre", a=2), 3))
    assert rep["eigenvalues"] == ["0", "-1", "-2", "-3"]
    assert rep["exact"] is True
