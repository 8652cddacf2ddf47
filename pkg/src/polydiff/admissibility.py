"""Boundary admissibility: metrics g and cofactors L with sum_j g^{ij} d_j Q = L_i Q.

The unknowns are the coefficients of the symmetric entries g^{ij}
(weighted degree <= a_i + a_j) and of the cofactors L_i (degree <= a_i); the
equations say that every coefficient of ``sum_j g^{ij} d_j Q - L_i Q``
vanishes.  The kernel is computed exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg
from .errors import DimensionMismatch, EmptySolution, NotAdmissible
from .operator import Metric, factor_cofactors
from .polyring import DegreeWeights, Poly, exact_divide, monomials_upto
from .region import Region

log = logging.getLogger(__name__)

EIG_TOL = -1e-12


@dataclass(frozen=True)
class LinearSystem:
    """Sparse coefficient system; ``unknowns[k]`` names column k."""

    Q: Poly
    weights: DegreeWeights
    unknowns: tuple
    rows: tuple
    row_labels: tuple

    @property
    def n_unknowns(self):
        return len(self.unknowns)

    @property
    def n_equations(self):
        return len(self.rows)


def build_system(Q: Poly, w=None) -> LinearSystem:
    if Q.is_zero():
        raise ValueError("boundary polynomial must be nonzero")
    d = Q.dimension
    w = DegreeWeights.ones(d) if w is None else (w if isinstance(w, DegreeWeights) else DegreeWeights(w))
    if len(w) != d:
        raise DimensionMismatch(f"{len(w)} weights for a polynomial in {d} variables")
    unknowns = []
    col = {}
    for i in range(d):
        for j in range(i, d):
            for e in monomials_upto(d, w[i] + w[j], w):
                col[("g", i, j, e)] = len(unknowns)
                unknowns.append(("g", i, j, e))
    for i in range(d):
        for e in monomials_upto(d, w[i], w):
            col[("L", i, e)] = len(unknowns)
            unknowns.append(("L", i, e))
    dQ = [Q.diff(j) for j in range(d)]
    rows = []
    labels = []
    for i in range(d):
        eqs = {}

        def add(mono, poly, column, sign):
            for pe, pc in poly.terms.items():
                key = tuple(a + b for a, b in zip(mono, pe))
                r = eqs.setdefault(key, {})
                v = r.get(column, 0) + sign * pc
                if v:
                    r[column] = v
                else:
                    r.pop(column, None)

        for j in range(d):
            a, b = min(i, j), max(i, j)
            for e in monomials_upto(d, w[a] + w[b], w):
                add(e, dQ[j], col[("g", a, b, e)], 1)
        for e in monomials_upto(d, w[i], w):
            add(e, Q, col[("L", i, e)], -1)
        for key in sorted(eqs):
            rows.append(eqs[key])
            labels.append((i, key))
    return LinearSystem(Q, w, tuple(unknowns), tuple(rows), tuple(labels))


def _vector_to_pair(system: LinearSystem, vec):
    d = system.Q.dimension
    vs = system.Q.variables
    g_terms = {}
    l_terms = [dict() for _ in range(d)]
    for k, c in vec.items():
        u = system.unknowns[k]
        if u[0] == "g":
            g_terms.setdefault((u[1], u[2]), {})[u[3]] = c
        else:
            l_terms[u[1]][u[2]] = c
    metric = Metric.from_upper({ij: Poly(vs, t) for ij, t in g_terms.items()}, d, vs)
    return metric, tuple(Poly(vs, t) for t in l_terms)


@dataclass
class RayReport:
    index: int
    min_eig: float
    min_eig_negated: float
    verdict: str  # "positive", "negative" (positive after a sign flip), "indefinite"
    witness: tuple = ()


@dataclass
class AdmissibilitySolution:
    Q: Poly
    weights: DegreeWeights
    basis: list
    positivity_report: list = field(default_factory=list)
    interior_point: tuple = None
    cone_witness: tuple | None = None
    free_directions: int = 0
    n_unknowns: int = 0
    n_equations: int = 0

    @property
    def dimension(self):
        return len(self.basis)

    @property
    def has_positive(self):
        return self.cone_witness is not None

    @property
    def unique(self):
        """Exactly one interior-positive ray."""
        return self.has_positive and self.free_directions == 0

    def combination(self, coefs):
        d = self.Q.dimension
        vs = self.Q.variables
        zero = Metric(tuple(tuple(Poly(vs) for _ in range(d)) for _ in range(d)))
        metric = zero
        cof = [Poly(vs) for _ in range(d)]
        for c, (g, L) in zip(coefs, self.basis):
            c = Fraction(c)
            metric = metric + g * c
            cof = [a + b * c for a, b in zip(cof, L)]
        return metric, tuple(cof)

    def positive_metric(self):
        """The witness metric (oriented to be positive inside), or None."""
        if self.cone_witness is None:
            return None
        return self.combination(self.cone_witness)

    def report(self):
        return {
            "Q": str(self.Q),
            "weights": list(self.weights.a),
            "unknowns": self.n_unknowns,
            "equations": self.n_equations,
            "dimension": self.dimension,
            "interior_positive": self.has_positive,
            "unique": self.unique,
            "verdict": (
                "positivity not checked" if self.interior_point is None and self.basis
                else "empty" if not self.has_positive
                else "one metric" if self.unique else "metric not unique"
            ),
            "basis": [
                {"metric": g.rows_as_strings(), "cofactors": [str(p) for p in L]}
                for g, L in self.basis
            ],
            "positivity": [
                {"ray": r.index, "min_eig": r.min_eig, "min_eig_negated": r.min_eig_negated,
                 "verdict": r.verdict}
                for r in self.positivity_report
            ],
            "witness": None if self.cone_witness is None else [str(c) for c in self.cone_witness],
        }


def _min_eigs(metrics_at):
    """Minimum eigenvalue per sample for an array (n, d, d)."""
    return np.linalg.eigvalsh(metrics_at)[:, 0]


def _basis_samples(basis, pts):
    arrs = []
    for g, _ in basis:
        model_like = [[p.lambdify() for p in row] for row in g.entries]
        d = g.dimension
        a = np.empty((len(pts), d, d))
        for i in range(d):
            for j in range(d):
                a[:, i, j] = model_like[i][j](pts)
        arrs.append(a)
    return arrs


def _cone_search(arrs, qs, max_lmi=96, rounds=4):
    """Maximise t with sum c_k G_k(x_s) >= t q_s I, |c_k| <= 1.

    In two dimensions each 2x2 constraint is the second-order cone
    a + c >= |(a - c, 2b)|, which vectorises.  Otherwise semidefinite
    constraints are imposed on a subset of samples, adding the worst
    violators and re-solving a few times.
    """
    import cvxpy as cp

    k = len(arrs)
    n, d, _ = arrs[0].shape
    G = np.stack(arrs, axis=-1)  # (n, d, d, k)

    def solve(idx):
        c = cp.Variable(k)
        t = cp.Variable()
        cons = [c <= 1, c >= -1]
        if d == 1:
            cons.append(G[idx, 0, 0, :] @ c >= t * qs[idx])
        elif d == 2:
            a = G[idx, 0, 0, :] @ c - cp.multiply(t, qs[idx])
            b = G[idx, 0, 1, :] @ c
            e = G[idx, 1, 1, :] @ c - cp.multiply(t, qs[idx])
            cons.append(cp.SOC(a + e, cp.vstack([a - e, 2 * b]), axis=0))
        else:
            for s_ in idx:
                M = sum(c[j] * G[s_, :, :, j] for j in range(k))
                cons.append(0.5 * (M + M.T) - t * qs[s_] * np.eye(d) >> 0)
        prob = cp.Problem(cp.Maximize(t), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except Exception:  # pragma: no cover - solver availability
            prob.solve()
        if c.value is None or t.value is None:
            return None, -np.inf
        return np.array(c.value), float(t.value)

    if d <= 2:
        return solve(np.arange(n))
    rng = np.random.default_rng(0)
    idx = np.sort(rng.choice(n, size=min(n, max_lmi), replace=False))
    for _ in range(rounds):
        c, t = solve(idx)
        if c is None or t <= 0:
            return c, t
        M = np.einsum("nijk,k->nij", G, c) - t * qs[:, None, None] * np.eye(d)
        viol = np.flatnonzero(_min_eigs(M) < -1e-9)
        if viol.size == 0:
            return c, t
        worst = viol[np.argsort(_min_eigs(M)[viol])[:max_lmi // 2]]
        idx = np.union1d(idx, worst)
    return c, t


def _rationalize(vec, max_den=10**4):
    vec = np.asarray(vec, float)
    scale = np.max(np.abs(vec))
    return tuple(Fraction(v / scale).limit_denominator(max_den) for v in vec)


def _pd_everywhere(arrs, coefs):
    M = sum(float(c) * a for c, a in zip(coefs, arrs))
    return float(np.min(_min_eigs(M)))


def solve_metrics(
    Q: Poly,
    w=None,
    interior_point=None,
    n_samples: int = 512,
    seed: int = 0,
    factors=None,
    allow_empty: bool = False,
) -> AdmissibilitySolution:
    """Exact kernel of the admissibility system plus an interior positivity scan."""
    system = build_system(Q, w)
    null = linalg.nullspace(system.rows, system.n_unknowns)
    basis = [_vector_to_pair(system, v) for v in null]
    # drop the trivial part: vectors with zero metric (possible only if Q = 0)
    basis = [(g, L) for g, L in basis if any(not p.is_zero() for row in g.entries for p in row)]
    sol = AdmissibilitySolution(
        Q=Q, weights=system.weights, basis=basis,
        interior_point=None if interior_point is None else tuple(Fraction(v) for v in interior_point),
        n_unknowns=system.n_unknowns, n_equations=system.n_equations,
    )
    if not basis:
        if allow_empty:
            return sol
        raise EmptySolution(f"only the trivial solution exists for Q = {Q}")
    if interior_point is None:
        return sol
    region = Region(list(factors) if factors else [Q], interior_point)
    pts = region.sample(n_samples, seed)
    pts = np.vstack([np.asarray([float(v) for v in interior_point])[None, :], pts])
    arrs = _basis_samples(basis, pts)
    for k, a in enumerate(arrs):
        me = _min_eigs(a)
        mn = _min_eigs(-a)
        scale = max(np.max(np.abs(a)), 1e-300)
        if me.min() >= EIG_TOL * scale:
            verdict = "positive"
        elif mn.min() >= EIG_TOL * scale:
            verdict = "negative"
        else:
            verdict = "indefinite"
        worst = pts[np.argmin(me)]
        sol.positivity_report.append(RayReport(k, float(me.min()), float(mn.min()), verdict,
                                               tuple(float(v) for v in worst)))
    if len(basis) == 1:
        v = sol.positivity_report[0].verdict
        if v in ("positive", "negative"):
            # strictly positive at the interior point as well
            sign = 1 if v == "positive" else -1
            if _min_eigs(sign * arrs[0][:1])[0] > 0:
                sol.cone_witness = (Fraction(sign),)
        return sol
    qv = np.abs(Q.lambdify()(pts))
    qs = qv / max(qv.max(), 1e-300)
    c, t = _cone_search(arrs, qs)
    if c is None or t <= 1e-7:
        return sol
    witness = _rationalize(c)
    if _pd_everywhere(arrs, witness) <= 0:
        witness = tuple(Fraction(float(v)) for v in c / np.max(np.abs(c)))
        if _pd_everywhere(arrs, witness) <= 0:
            return sol
    sol.cone_witness = witness
    # count kernel directions along which positivity survives a small push
    wv = np.array([float(v) for v in witness])
    comp = np.linalg.svd(np.eye(len(wv)) - np.outer(wv, wv) / (wv @ wv))[0][:, : len(wv) - 1]
    free = 0
    for k in range(comp.shape[1]):
        dvec = comp[:, k] * 1e-2 * np.linalg.norm(wv)
        if _pd_everywhere(arrs, wv + dvec) > 0 and _pd_everywhere(arrs, wv - dvec) > 0:
            free += 1
    sol.free_directions = free
    return sol


def check_divides_det(g: Metric, Q: Poly):
    """det(g) / Q when Q divides det(g), else None."""
    return exact_divide(g.det(), Q)


def per_factor_cofactors(g: Metric, factors):
    """Cofactor vector for every factor; NotAdmissible names the first failure."""
    out = []
    for k, f in enumerate(factors):
        cof = factor_cofactors(g, f)
        if cof is None:
            raise NotAdmissible(f"factor {k} admits no cofactor vector", factor=k)
        out.append(cof)
    return out


def failing_factor(g: Metric, factors):
    """Index of the first factor without cofactors, or None."""
    for k, f in enumerate(factors):
        if factor_cofactors(g, f) is None:
            return k
    return None


def residual(g: Metric, L, Q: Poly):
    """The polynomials sum_j g^{ij} d_j Q - L_i Q (all zero for a solution)."""
    d = g.dimension
    out = []
    for i in range(d):
        r = -L[i] * Q
        for j in range(d):
            r = r + g[i, j] * Q.diff(j)
        out.append(r)
    return out
