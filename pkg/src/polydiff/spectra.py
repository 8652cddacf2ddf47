"""Spectral decomposition of L on the polynomial filtration P_n.

The matrix of L in the monomial basis of P_n is block upper triangular
with respect to the weighted degree.  Eigenvalues come from the diagonal
blocks; eigenvectors are completed by back substitution through the lower
degrees.  When every diagonal block is 1x1 (one variable) the eigenvalues
are the exact diagonal entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import linalg as sla

from .errors import ComplexEigenvalue, FiltrationViolation, SingularGram, UnsupportedFamily
from .operator import Model, apply_L
from .polyring import DegreeWeights, Poly, monomial_degree, monomials_upto

REAL_TOL = 1e-9


@dataclass
class SpectralBlock:
    degree: int
    variables: tuple
    weights: tuple
    basis: list
    matrix: list  # exact rationals, column j = L(basis[j])
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None
    exact_eigenvalues: list | None = None
    levels: list = field(default_factory=list)  # weighted degree of each eigenpair

    @property
    def size(self):
        return len(self.basis)

    def float_matrix(self):
        return np.array([[float(v) for v in row] for row in self.matrix])

    def polynomial(self, k) -> Poly:
        """Eigenvector k as a polynomial (float coefficients as Fractions)."""
        terms = {e: Fraction(float(c)) for e, c in zip(self.basis, self.eigenvectors[:, k]) if c}
        return Poly(self.variables, terms)

    def evaluate_basis(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        E = np.array(self.basis, dtype=float)
        return np.prod(pts[:, None, :] ** E[None, :, :], axis=2)


def operator_matrix(m: Model, n: int) -> SpectralBlock:
    """Exact matrix of L on the monomials of weighted degree <= n."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    if len(m.relations):
        raise UnsupportedFamily(
            "spectra are computed on coordinate models only; use an image model"
        )
    w = m.weights
    basis = monomials_upto(m.dimension, n, w)
    index = {e: i for i, e in enumerate(basis)}
    N = len(basis)
    A = [[Fraction(0)] * N for _ in range(N)]
    for j, e in enumerate(basis):
        img = apply_L(m, Poly(m.variables, {e: Fraction(1)}))
        for t, c in img.terms.items():
            i = index.get(t)
            if i is None:
                raise FiltrationViolation(
                    f"L({e}) has the term {t} of weighted degree {monomial_degree(t, w)} > {n}",
                    monomial=e, term=t,
                )
            A[i][j] = c
    return SpectralBlock(n, m.variables, tuple(w.a), basis, A)


def _levels(block):
    w = DegreeWeights(block.weights)
    return np.array([monomial_degree(e, w) for e in block.basis])


def eigen_blocks(m: Model, n: int, tol: float = REAL_TOL) -> SpectralBlock:
    """Eigenpairs of L on P_n, eigenvalues sorted descending."""
    block = operator_matrix(m, n)
    return decompose(block, tol)


def decompose(block: SpectralBlock, tol: float = REAL_TOL) -> SpectralBlock:
    A = block.float_matrix()
    lev = _levels(block)
    N = block.size
    vals, vecs, levels = [], [], []
    exact = []
    for k in range(int(lev.max()) + 1 if N else 0):
        idx = np.flatnonzero(lev == k)
        if not idx.size:
            continue
        Akk = A[np.ix_(idx, idx)]
        if idx.size == 1:
            lam = np.array([Akk[0, 0]])
            U = np.ones((1, 1))
            exact.append(block.matrix[idx[0]][idx[0]])
        else:
            lam, U = np.linalg.eig(Akk)
            scale = max(1.0, np.abs(lam).max())
            if np.abs(lam.imag).max() > tol * scale:
                raise ComplexEigenvalue(
                    f"complex eigenvalues at degree {k}: max imaginary part {np.abs(lam.imag).max():.3e}"
                )
            lam, U = lam.real, U.real
            exact = None if exact is None else exact + [None] * idx.size
        for t in range(idx.size):
            v = np.zeros(N)
            v[idx] = U[:, t]
            # back substitution through lower degrees
            for j in range(k - 1, -1, -1):
                jdx = np.flatnonzero(lev == j)
                if not jdx.size:
                    continue
                hi = np.flatnonzero(lev > j)
                rhs = -A[np.ix_(jdx, hi)] @ v[hi]
                M = A[np.ix_(jdx, jdx)] - lam[t] * np.eye(jdx.size)
                v[jdx] = np.linalg.lstsq(M, rhs, rcond=None)[0]
            vals.append(lam[t])
            vecs.append(v / np.linalg.norm(v))
            levels.append(k)
    vals = np.array(vals)
    order = np.argsort(-vals, kind="stable")
    block.eigenvalues = vals[order]
    block.eigenvectors = np.array(vecs).T[:, order] if vecs else np.zeros((0, 0))
    block.levels = [levels[i] for i in order]
    if exact is not None and all(e is not None for e in exact):
        block.exact_eigenvalues = [exact[i] for i in order]
    return block


# ---------------------------------------------------------------------------
# orthonormalisation


@dataclass
class OrthonormalBasis:
    eigenvalues: np.ndarray
    coefficients: np.ndarray  # columns in the monomial basis
    basis: list
    gram: np.ndarray  # Gram matrix of the input eigenvectors
    cross_residual: float  # largest normalised Gram entry between distinct eigenvalues
    variables: tuple = ()

    def evaluate(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        E = np.array(self.basis, dtype=float)
        mons = np.prod(pts[:, None, :] ** E[None, :, :], axis=2)
        return mons @ self.coefficients


def moment_matrix(basis, moments) -> np.ndarray:
    """M_ab = integral of x^(a+b)."""
    N = len(basis)
    M = np.empty((N, N))
    for i, a in enumerate(basis):
        for j in range(i, N):
            e = tuple(x + y for x, y in zip(a, basis[j]))
            M[i, j] = M[j, i] = float(moments.value(e))
    return M


def eigenspaces(vals, rel_tol=1e-7):
    groups = []
    for i, v in enumerate(vals):
        if groups and abs(vals[groups[-1][0]] - v) <= rel_tol * max(1.0, abs(v)):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def orthonormalize(block: SpectralBlock, moments, rel_tol=1e-7) -> OrthonormalBasis:
    """Orthonormal eigenbasis with respect to the moment inner product."""
    if block.eigenvectors is None:
        decompose(block)
    M = moment_matrix(block.basis, moments)
    V = block.eigenvectors
    G = V.T @ M @ V
    d = np.diag(G)
    if np.any(d <= 0):
        raise SingularGram("eigenvector with non-positive norm", min_norm=float(d.min()))
    D = 1 / np.sqrt(d)
    Gn = G * D[:, None] * D[None, :]
    groups = eigenspaces(block.eigenvalues, rel_tol)
    label = np.empty(len(d), int)
    for g, idx in enumerate(groups):
        label[idx] = g
    cross = label[:, None] != label[None, :]
    resid = float(np.abs(Gn[cross]).max()) if cross.any() else 0.0
    C = np.zeros_like(V)
    for idx in groups:
        sub = G[np.ix_(idx, idx)]
        # pivoted by canonical order: Cholesky of the eigenspace Gram
        try:
            Lc = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            raise SingularGram("degenerate eigenspace Gram matrix", eigenvalue=float(block.eigenvalues[idx[0]])) from None
        C[:, idx] = V[:, idx] @ np.linalg.inv(Lc).T
    # fix signs: positive leading coefficient in canonical order
    for k in range(C.shape[1]):
        nz = np.flatnonzero(np.abs(C[:, k]) > 1e-12)
        if nz.size and C[nz[-1], k] < 0:
            C[:, k] = -C[:, k]
    return OrthonormalBasis(block.eigenvalues.copy(), C, block.basis, G, resid, block.variables)


# ---------------------------------------------------------------------------
# heat kernel


@dataclass
class HeatKernelValue:
    value: float
    tail_bound: float
    normalization: float
    positive: bool


def heat_kernel(block: SpectralBlock, ortho: OrthonormalBasis, t: float, x, y, N=None,
                moments=None, tail_levels=20) -> HeatKernelValue:
    """Truncated sum of exp(lambda_k t) P_k(x) P_k(y) over levels <= N.

    The tail bound is a surrogate: the largest |P(x)P(y)| at the top level
    multiplied by exp(mu_j t) times the number of monomials at each weighted
    degree j in N+1 .. N+tail_levels, with mu_j the least negative leading
    eigenvalue extrapolated quadratically from the computed levels.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    N = block.degree if N is None else min(N, block.degree)
    lev = np.array(block.levels)
    keep = lev <= N
    px = ortho.evaluate(x)[0]
    py = ortho.evaluate(y)[0]
    e = np.exp(ortho.eigenvalues * t)
    value = float(np.sum((e * px * py)[keep]))
    if moments is not None:
        mean = np.array([float(moments.value(b)) for b in ortho.basis]) @ ortho.coefficients
        normalization = float(np.sum((e * px * mean)[keep]))
    else:
        normalization = float("nan")
    tail = _tail_surrogate(block, ortho, lev, keep, px, py, t, N, tail_levels)
    return HeatKernelValue(value, tail, normalization, value > 0)


def _tail_surrogate(block, ortho, lev, keep, px, py, t, N, tail_levels):
    top = keep & (lev == N)
    if not top.any():
        return 0.0
    S = float(np.abs(px * py)[top].max())
    # mu_k ~ alpha k^2 + beta k fitted on per-level maxima
    ks, mus = [], []
    for k in sorted(set(lev[keep].tolist())):
        if k == 0:
            continue
        ks.append(k)
        mus.append(float(ortho.eigenvalues[keep & (lev == k)].max()))
    if len(ks) >= 2:
        X = np.array([[k * k, k] for k in ks], float)
        coef = np.linalg.lstsq(X, np.array(mus), rcond=None)[0]
    else:
        coef = np.array([0.0, mus[0] if mus else -1.0])
    w = DegreeWeights(block.weights)
    d = len(block.weights)
    total = 0.0
    for j in range(N + 1, N + 1 + tail_levels):
        mu = min(coef[0] * j * j + coef[1] * j, 0.0)
        count = sum(1 for e in monomials_upto(d, j, w) if monomial_degree(e, w) == j)
        total += count * S * np.exp(mu * t)
    return float(total)


def reproducing_kernel_oracle(block: SpectralBlock, moments, t, x, y) -> float:
    """m(y)^T expm(tA) M^{-1} m(x): the semigroup applied to the projected delta at x.

    Uses only the operator matrix and moments, not the eigendecomposition.
    """
    A = block.float_matrix()
    M = moment_matrix(block.basis, moments)
    mx = block.evaluate_basis(x)[0]
    my = block.evaluate_basis(y)[0]
    c = np.linalg.solve(M, mx)
    return float(my @ (sla.expm(t * A) @ c))


def spectrum_report(block: SpectralBlock) -> dict:
    out = {"degree": block.degree, "variables": list(block.variables),
           "weights": list(block.weights), "size": block.size}
    if block.exact_eigenvalues is not None:
        out["eigenvalues"] = [str(v) for v in block.exact_eigenvalues]
        out["exact"] = True
    else:
        out["eigenvalues"] = [float(f"{v:.12g}") for v in block.eigenvalues]
        out["exact"] = False
    by_level = {}
    for lam, k in zip(block.eigenvalues, block.levels):
        by_level.setdefault(int(k), []).append(float(f"{lam:.12g}"))
    out["by_level"] = {str(k): v for k, v in sorted(by_level.items())}
    return out
