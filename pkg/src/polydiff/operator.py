"""Markov triples on polynomial algebras.

A :class:`Model` bundles a co-metric ``g`` (symmetric matrix of polynomials),
a drift ``b`` and optionally a boundary with its measure exponents.  The
generator is ``L f = sum g^{ij} d_ij f + sum b^i d_i f`` (no factor 1/2) and
the carré du champ is ``Gamma(f, h) = sum g^{ij} d_i f d_j h``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    ClosureFailure,
    DegenerateAtPoint,
    DegreeViolation,
    DimensionMismatch,
    NotAdmissible,
    ParseError,
)
from .polyring import (
    NEG_INF,
    DegreeWeights,
    Poly,
    RelationSet,
    as_fraction,
    evaluate,
    exact_divide,
    express_in,
)

SCHEMA = "polydiff/1"


@dataclass(frozen=True)
class Metric:
    """Symmetric d x d matrix of polynomials (the co-metric g^{ij})."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        d = len(rows)
        if d == 0 or any(len(r) != d for r in rows):
            raise DimensionMismatch("metric must be a nonempty square matrix")
        ring = rows[0][0].variables
        for i in range(d):
            for j in range(d):
                if rows[i][j].variables != ring:
                    raise DimensionMismatch("metric entries live in different rings")
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"metric is not symmetric at ({i},{j})")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def from_upper(cls, upper: dict, d: int, variables):
        """Build from a dict {(i, j): Poly} with i <= j; missing entries are 0."""
        zero = Poly(variables)
        rows = [[zero] * d for _ in range(d)]
        for (i, j), p in upper.items():
            rows[i][j] = p
            rows[j][i] = p
        return cls(tuple(tuple(r) for r in rows))

    @property
    def dimension(self):
        return len(self.entries)

    @property
    def variables(self):
        return self.entries[0][0].variables

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __mul__(self, c):
        return Metric(tuple(tuple(p * c for p in r) for r in self.entries))

    __rmul__ = __mul__

    def __add__(self, other):
        return Metric(
            tuple(tuple(p + q for p, q in zip(r, s)) for r, s in zip(self.entries, other.entries))
        )

    def det(self) -> Poly:
        return poly_det([list(r) for r in self.entries])

    def at(self, point) -> np.ndarray:
        return np.array([[float(evaluate(p, point)) for p in r] for r in self.entries])

    def exact_at(self, point):
        return [[evaluate(p, point) for p in r] for r in self.entries]

    def rows_as_strings(self):
        return [[str(p) for p in r] for r in self.entries]


def poly_det(rows) -> Poly:
    """Determinant by cofactor expansion (fine for the small sizes used here)."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = Poly(rows[0][0].variables)
    for j in range(n):
        if rows[0][j].is_zero():
            continue
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        term = rows[0][j] * poly_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


@dataclass(frozen=True)
class BoundarySpec:
    """Reduced boundary equation Q with supplied factors and measure exponents."""

    Q: Poly
    factors: tuple
    exponents: tuple = ()

    def __post_init__(self):
        factors = tuple(self.factors) or (self.Q,)
        exps = tuple(as_fraction(r) for r in self.exponents) or (Fraction(0),) * len(factors)
        if len(exps) != len(factors):
            raise DimensionMismatch("one exponent per boundary factor is required")
        if self.Q.is_zero():
            raise ValueError("boundary polynomial must be nonzero")
        prod = Poly.const(1, self.Q.variables)
        for f in factors:
            prod = prod * f
        ratio = _constant_ratio(prod, self.Q)
        if ratio is None:
            raise ValueError("product of factors does not equal Q up to a constant")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "exponents", exps)

    def with_exponents(self, exponents):
        return BoundarySpec(self.Q, self.factors, tuple(exponents))

    def density(self, point):
        """Unnormalised boundary part of the density, prod |Q_k|^{r_k}."""
        val = 1.0
        for f, r in zip(self.factors, self.exponents):
            if r:
                val *= abs(float(evaluate(f, point))) ** float(r)
        return val


def _constant_ratio(p: Poly, q: Poly):
    """c with p == c*q for a nonzero rational constant c, else None."""
    if p.is_zero() or q.is_zero():
        return None
    e, c = q.leading_term()
    ratio = p.coefficient(e) / c
    if ratio and p == q * ratio:
        return ratio
    return None


@dataclass(frozen=True)
class Model:
    variables: tuple
    metric: Metric
    drift: tuple
    weights: DegreeWeights = None
    boundary: BoundarySpec | None = None
    relations: RelationSet = field(default_factory=RelationSet)
    interior_point: tuple = None
    exponential_weights: tuple = ()
    name: str = ""

    def __post_init__(self):
        variables = tuple(self.variables)
        d = len(variables)
        object.__setattr__(self, "variables", variables)
        if self.metric.dimension != d or self.metric.variables != variables:
            raise DimensionMismatch("metric does not match the model variables")
        drift = tuple(self.drift)
        if len(drift) != d or any(b.variables != variables for b in drift):
            raise DimensionMismatch("drift does not match the model variables")
        object.__setattr__(self, "drift", drift)
        w = self.weights if self.weights is not None else DegreeWeights.ones(d)
        if not isinstance(w, DegreeWeights):
            w = DegreeWeights(tuple(w))
        if len(w) != d:
            raise DimensionMismatch("weights do not match dimension")
        object.__setattr__(self, "weights", w)
        if not isinstance(self.relations, RelationSet):
            object.__setattr__(self, "relations", RelationSet(tuple(self.relations)))
        ew = tuple(self.exponential_weights)
        object.__setattr__(self, "exponential_weights", ew)
        for i in range(d):
            if drift[i].degree(w) > w[i]:
                raise DegreeViolation(
                    f"deg b^{i} = {drift[i].degree(w)} exceeds weight {w[i]}", index=i
                )
            for j in range(d):
                if self.metric[i, j].degree(w) > w[i] + w[j]:
                    raise DegreeViolation(
                        f"deg g^{i}{j} exceeds {w[i] + w[j]}", index=(i, j)
                    )
        if self.interior_point is not None:
            pt = tuple(as_fraction(v) for v in self.interior_point)
            if len(pt) != d:
                raise DimensionMismatch("interior point has wrong length")
            object.__setattr__(self, "interior_point", pt)
            if self.boundary is not None and evaluate(self.boundary.Q, pt) == 0:
                raise ValueError("interior point lies on the boundary")

    @property
    def dimension(self):
        return len(self.variables)

    def poly(self, text) -> Poly:
        return Poly.parse(text, self.variables)

    def gens(self):
        return Poly.gens(self.variables)

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)

    @cached_property
    def _compiled(self):
        d = self.dimension
        g = [[self.metric[i, j].lambdify() for j in range(d)] for i in range(d)]
        b = [p.lambdify() for p in self.drift]
        return g, b

    def metric_at(self, points) -> np.ndarray:
        """Co-metric at an (n, d) array of points, shape (n, d, d)."""
        pts = np.atleast_2d(np.asarray(points, float))
        g, _ = self._compiled
        d = self.dimension
        out = np.empty((pts.shape[0], d, d))
        for i in range(d):
            for j in range(i, d):
                out[:, i, j] = g[i][j](pts)
                out[:, j, i] = out[:, i, j]
        return out

    def drift_at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        _, b = self._compiled
        return np.stack([f(pts) for f in b], axis=1)


def _check_ring(m: Model, *polys):
    for p in polys:
        if p.variables != m.variables:
            raise DimensionMismatch(f"polynomial ring {p.variables} is not {m.variables}")


def gamma(m: Model, f: Poly, h: Poly) -> Poly:
    _check_ring(m, f, h)
    df = [f.diff(i) for i in range(m.dimension)]
    dh = [h.diff(i) for i in range(m.dimension)] if h is not f else df
    out = Poly(m.variables)
    for i in range(m.dimension):
        if df[i].is_zero():
            continue
        for j in range(m.dimension):
            if dh[j].is_zero() or m.metric[i, j].is_zero():
                continue
            out = out + m.metric[i, j] * df[i] * dh[j]
    return out


def apply_L(m: Model, f: Poly) -> Poly:
    _check_ring(m, f)
    d = m.dimension
    out = Poly(m.variables)
    for i in range(d):
        fi = f.diff(i)
        if fi.is_zero():
            continue
        if not m.drift[i].is_zero():
            out = out + m.drift[i] * fi
        for j in range(d):
            if m.metric[i, j].is_zero():
                continue
            fij = fi.diff(j)
            if not fij.is_zero():
                out = out + m.metric[i, j] * fij
    return out


def chain_rule(m: Model, maps: Sequence[Poly], outer: Poly) -> Poly:
    """L(Phi(f_1..f_k)) via the change-of-variables formula."""
    k = len(maps)
    if outer.dimension != k:
        raise DimensionMismatch(f"outer has {outer.dimension} variables, {k} maps given")
    maps = list(maps)
    Lf = [apply_L(m, f) for f in maps]
    out = Poly(m.variables)
    for i in range(k):
        di = outer.diff(i)
        if di.is_zero():
            continue
        out = out + di.compose(maps) * Lf[i]
        for j in range(k):
            dij = di.diff(j)
            if not dij.is_zero():
                out = out + dij.compose(maps) * gamma(m, maps[i], maps[j])
    return out


def factor_cofactors(metric: Metric, factor: Poly):
    """Vector L_i with sum_j g^{ij} d_j Q = L_i Q, or None if some row fails."""
    d = metric.dimension
    dq = [factor.diff(j) for j in range(d)]
    out = []
    for i in range(d):
        row = Poly(metric.variables)
        for j in range(d):
            row = row + metric[i, j] * dq[j]
        q = exact_divide(row, factor)
        if q is None:
            return None
        out.append(q)
    return out


def drift_from_measure(
    metric: Metric,
    boundary: BoundarySpec | None = None,
    exponential_weights: Sequence[Poly] = (),
    weights=None,
):
    """Drift making L symmetric for rho = prod Q_k^{r_k} * exp(sum V)."""
    d = metric.dimension
    drift = []
    for i in range(d):
        b = Poly(metric.variables)
        for j in range(d):
            b = b + metric[i, j].diff(j)
        drift.append(b)
    if boundary is not None:
        for k, (f, r) in enumerate(zip(boundary.factors, boundary.exponents)):
            if not r:
                continue
            cof = factor_cofactors(metric, f)
            if cof is None:
                raise NotAdmissible(
                    f"factor {k} ({f}) does not satisfy the cofactor equation", factor=k
                )
            drift = [b + c * r for b, c in zip(drift, cof)]
    for V in exponential_weights:
        for i in range(d):
            for j in range(d):
                drift[i] = drift[i] + metric[i, j] * V.diff(j)
    if weights is not None:
        w = weights if isinstance(weights, DegreeWeights) else DegreeWeights(weights)
        for i, b in enumerate(drift):
            if b.degree(w) > w[i]:
                raise DegreeViolation(f"derived drift b^{i} has degree {b.degree(w)}", index=i)
    return tuple(drift)


def infer_exponents(metric: Metric, factors, drift, exponential_weights=()):
    """Exponents r_k with drift = div g + sum r_k L^{(k)} + g grad V, or None.

    Solved exactly as a linear system over the drift coefficients.
    """
    from . import linalg

    d = metric.dimension
    base = drift_from_measure(metric, None, exponential_weights)
    target = [b - b0 for b, b0 in zip(drift, base)]
    cols = []
    for k, f in enumerate(factors):
        cof = factor_cofactors(metric, f)
        if cof is None:
            raise NotAdmissible(f"factor {k} ({f}) admits no cofactor vector", factor=k)
        cols.append(cof)
    index = {}
    rows = []
    rhs = []
    for i in range(d):
        keys = set(target[i].terms)
        for c in cols:
            keys |= set(c[i].terms)
        for e in sorted(keys):
            index[(i, e)] = len(rows)
            rows.append({k: c[i].coefficient(e) for k, c in enumerate(cols) if c[i].coefficient(e)})
            rhs.append(target[i].coefficient(e))
    sol = linalg.solve(rows, rhs, len(cols))
    return None if sol is None else tuple(sol)


def image_operator(
    m: Model,
    maps,
    boundary: BoundarySpec | None = None,
    name: str = "",
    raise_on_failure: bool = False,
):
    """Image of ``m`` under polynomial maps ``[(name, Poly, weight), ...]``.

    Each L f_i must be a polynomial in the f's of weighted degree <= w_i, and
    each Gamma(f_i, f_j) of degree <= w_i + w_j, modulo ``m.relations``.
    Returns the image Model, or None if some entry does not close
    (``ClosureFailure`` naming the entry when ``raise_on_failure``).
    """
    if not maps:
        raise DimensionMismatch("image_operator needs at least one map")
    names = tuple(n for n, _, _ in maps)
    polys = [p for _, p, _ in maps]
    w = tuple(int(a) for _, _, a in maps)
    gens = list(zip(names, polys))
    k = len(maps)

    def close(target, cap, label):
        G = express_in(target, gens, m.relations, cap, weights=w, image_variables=names,
                       source_weights=m.weights)
        if G is None:
            if raise_on_failure:
                raise ClosureFailure(f"{label} does not close", entry=label)
            return None
        return G

    drift = []
    for i in range(k):
        G = close(apply_L(m, polys[i]), w[i], f"L({names[i]})")
        if G is None:
            return None
        drift.append(G)
    upper = {}
    for i in range(k):
        for j in range(i, k):
            G = close(gamma(m, polys[i], polys[j]), w[i] + w[j], f"Gamma({names[i]},{names[j]})")
            if G is None:
                return None
            upper[(i, j)] = G
    interior = None
    if m.interior_point is not None:
        interior = tuple(evaluate(p, m.interior_point) for p in polys)
        if boundary is not None and evaluate(boundary.Q, interior) == 0:
            interior = None
    return Model(
        variables=names,
        metric=Metric.from_upper(upper, k, names),
        drift=tuple(drift),
        weights=DegreeWeights(w),
        boundary=boundary,
        interior_point=interior,
        name=name,
    )


# ---------------------------------------------------------------------------
# one complex coordinate -> two real ones


def _conj_mirror(p: Poly) -> Poly:
    """Complex conjugate of a polynomial in (Z, Zb) with rational coefficients."""
    return Poly(p.variables, {(e[1], e[0]): c for e, c in p.terms.items()})


def _complex_expand(p: Poly, real_vars):
    """(re, im) of p(x+iy, x-iy) as real polynomials."""
    x, y = Poly.gens(real_vars)
    zero = Poly(real_vars)
    one = Poly.const(1, real_vars)

    def cmul(a, b):
        return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])

    zp = [(one, zero)]
    zbp = [(one, zero)]
    maxp = max((e[0] for e in p.terms), default=0)
    maxq = max((e[1] for e in p.terms), default=0)
    for _ in range(maxp):
        zp.append(cmul(zp[-1], (x, y)))
    for _ in range(maxq):
        zbp.append(cmul(zbp[-1], (x, -y)))
    re, im = zero, zero
    for (a, b), c in p.terms.items():
        r, i = cmul(zp[a], zbp[b])
        re = re + r * c
        im = im + i * c
    return re, im


def complex_to_real(
    gzz: Poly,
    gzzb: Poly,
    lz: Poly,
    gzbzb: Poly | None = None,
    real_vars=("x", "y"),
    boundary: BoundarySpec | None = None,
    interior_point=None,
    name: str = "",
) -> Model:
    """Real model in (x, y) from complex data with Z = x + iy.

    The inputs are polynomials in the variables ``("Z", "Zb")``.
    """
    ring = gzz.variables
    if len(ring) != 2 or gzzb.variables != ring or lz.variables != ring:
        raise DimensionMismatch("complex data must be polynomials in (Z, Zb)")
    mirror = _conj_mirror(gzz)
    if gzbzb is None:
        gzbzb = mirror
    elif gzbzb != mirror:
        raise ValueError("Gamma(Zb,Zb) is not the conjugate of Gamma(Z,Z)")
    if _conj_mirror(gzzb) != gzzb:
        raise ValueError("Gamma(Z,Zb) is not conjugation-symmetric")
    a_re, a_im = _complex_expand(gzz, real_vars)
    b_re, b_im = _complex_expand(gzzb, real_vars)
    c_re, c_im = _complex_expand(gzbzb, real_vars)
    lb_re, lb_im = _complex_expand(lz, real_vars)
    q = Fraction(1, 4)
    gxx_re, gxx_im = (a_re + b_re * 2 + c_re) * q, (a_im + b_im * 2 + c_im) * q
    gyy_re, gyy_im = -(a_re - b_re * 2 + c_re) * q, -(a_im - b_im * 2 + c_im) * q
    # (1/4i)(A - C): real part (A_im - C_im)/4, imaginary part -(A_re - C_re)/4
    gxy_re, gxy_im = (a_im - c_im) * q, -(a_re - c_re) * q
    for label, im in (("Gamma(x,x)", gxx_im), ("Gamma(y,y)", gyy_im), ("Gamma(x,y)", gxy_im)):
        if not im.is_zero():
            raise ValueError(f"{label} has a nonzero imaginary part: inconsistent input")
    metric = Metric(((gxx_re, gxy_re), (gxy_re, gyy_re)))
    return Model(
        variables=tuple(real_vars),
        metric=metric,
        drift=(lb_re, lb_im),
        boundary=boundary,
        interior_point=interior_point,
        name=name,
    )


# ---------------------------------------------------------------------------
# curvature


def _jets(m: Model, point):
    d = m.dimension
    H = [[evaluate(m.metric[i, j], point) for j in range(d)] for i in range(d)]
    H1 = [
        [[evaluate(m.metric[i, j].diff(a), point) for j in range(d)] for i in range(d)]
        for a in range(d)
    ]
    H2 = [
        [
            [[evaluate(m.metric[i, j].diff(a).diff(b), point) for j in range(d)] for i in range(d)]
            for b in range(d)
        ]
        for a in range(d)
    ]
    return H, H1, H2


def _mm(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


def _madd(*Ms):
    return [[sum(M[i][j] for M in Ms) for j in range(len(Ms[0][0]))] for i in range(len(Ms[0]))]


def _mneg(A):
    return [[-v for v in r] for r in A]


def _det3(M):
    return (
        M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
        - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
        + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0])
    )


def gaussian_curvature(m: Model, point, exact: bool = False):
    """Gaussian curvature of the inverse co-metric at a rational point.

    Derivatives of g_{ij} = (g^{ij})^{-1} are taken exactly from the
    polynomial jets (dG = -G dH G and its second-order analogue); the
    Brioschi formula is then applied in exact arithmetic.
    """
    if m.dimension != 2:
        raise DimensionMismatch("curvature is implemented for d = 2 only")
    point = tuple(as_fraction(v) for v in point)
    H, H1, H2 = _jets(m, point)
    det = H[0][0] * H[1][1] - H[0][1] * H[1][0]
    if det == 0:
        raise DegenerateAtPoint(f"co-metric is singular at {point}", point=point)
    G = [[H[1][1] / det, -H[0][1] / det], [-H[1][0] / det, H[0][0] / det]]
    G1 = [_mneg(_mm(_mm(G, H1[a]), G)) for a in range(2)]
    G2 = [[None, None], [None, None]]
    for a in range(2):
        for b in range(2):
            t1 = _mm(_mm(_mm(_mm(G, H1[a]), G), H1[b]), G)
            t2 = _mm(_mm(_mm(_mm(G, H1[b]), G), H1[a]), G)
            t3 = _mneg(_mm(_mm(G, H2[a][b]), G))
            G2[a][b] = _madd(t1, t2, t3)
    E, F, Gg = G[0][0], G[0][1], G[1][1]
    Eu, Ev = G1[0][0][0], G1[1][0][0]
    Fu, Fv = G1[0][0][1], G1[1][0][1]
    Gu, Gv = G1[0][1][1], G1[1][1][1]
    Evv = G2[1][1][0][0]
    Fuv = G2[0][1][0][1]
    Guu = G2[0][0][1][1]
    half = Fraction(1, 2)
    A = [
        [-half * Evv + Fuv - half * Guu, half * Eu, Fu - half * Ev],
        [Fv - half * Gu, E, F],
        [half * Gv, F, Gg],
    ]
    B = [[0, half * Ev, half * Gu], [half * Ev, E, F], [half * Gu, F, Gg]]
    K = (_det3(A) - _det3(B)) / (E * Gg - F * F) ** 2
    return K if exact else float(K)


# ---------------------------------------------------------------------------
# descriptors


def to_descriptor(m: Model) -> dict:
    out = {
        "schema": SCHEMA,
        "name": m.name,
        "dimension": m.dimension,
        "variables": list(m.variables),
        "weights": list(m.weights.a),
        "metric": m.metric.rows_as_strings(),
        "drift": [str(b) for b in m.drift],
        "boundary": None,
        "relations": [str(r) for r in m.relations],
        "interior_point": None if m.interior_point is None else [str(v) for v in m.interior_point],
        "exponential_weights": [str(v) for v in m.exponential_weights],
    }
    if m.boundary is not None:
        out["boundary"] = {
            "Q": str(m.boundary.Q),
            "factors": [str(f) for f in m.boundary.factors],
            "exponents": [str(r) for r in m.boundary.exponents],
        }
    return out


def from_descriptor(data: dict) -> Model:
    if data.get("schema") != SCHEMA:
        raise ParseError(f"unsupported schema {data.get('schema')!r}, expected {SCHEMA}")
    try:
        vs = tuple(data["variables"])
        if int(data.get("dimension", len(vs))) != len(vs):
            raise DimensionMismatch("dimension does not match variables")

        def P(s):
            return Poly.parse(s, vs)

        boundary = None
        if data.get("boundary"):
            b = data["boundary"]
            boundary = BoundarySpec(
                P(b["Q"]), tuple(P(f) for f in b.get("factors", [])),
                tuple(Fraction(r) for r in b.get("exponents", [])),
            )
        ip = data.get("interior_point")
        return Model(
            variables=vs,
            metric=Metric(tuple(tuple(P(s) for s in row) for row in data["metric"])),
            drift=tuple(P(s) for s in data["drift"]),
            weights=DegreeWeights(tuple(data.get("weights") or (1,) * len(vs))),
            boundary=boundary,
            relations=RelationSet(tuple(P(s) for s in data.get("relations", []))),
            interior_point=None if ip is None else tuple(Fraction(v) for v in ip),
            exponential_weights=tuple(P(s) for s in data.get("exponential_weights", [])),
            name=data.get("name", ""),
        )
    except KeyError as exc:
        raise ParseError(f"descriptor is missing field {exc}") from None


def dumps(m: Model) -> str:
    return json.dumps(to_descriptor(m), indent=2)


def loads(text: str) -> Model:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid descriptor JSON: {exc}") from None
    return from_descriptor(data)


__all__ = [
    "Metric", "BoundarySpec", "Model", "gamma", "apply_L", "chain_rule",
    "factor_cofactors", "drift_from_measure", "infer_exponents", "image_operator", "complex_to_real",
    "gaussian_curvature", "poly_det", "to_descriptor", "from_descriptor", "dumps",
    "loads", "NEG_INF",
]
