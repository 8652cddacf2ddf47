"""Moments of reversible measures: closed forms and seeded quasi-Monte Carlo."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateRegion, NonIntegrable, UnsupportedFamily
from .operator import Model
from .polyring import Poly, monomials_upto
from .region import Region

EXACT, MC = "EXACT", "MC"
N_BLOCKS = 32


@dataclass
class MomentTable:
    variables: tuple
    entries: dict  # exponent -> (value, stderr, method)
    normalization: float = 1.0
    method: str = EXACT
    # MC only: per-block estimates, one row per block, columns follow ``order``
    blocks: np.ndarray | None = None
    order: list = field(default_factory=list)
    acceptance_rate: float | None = None

    def value(self, e):
        e = tuple(e)
        try:
            return self.entries[e][0]
        except KeyError:
            raise KeyError(f"moment {e} not in table (max degree too small)") from None

    def stderr(self, e):
        return self.entries[tuple(e)][1]

    @property
    def max_degree(self):
        return max((sum(e) for e in self.entries), default=0)

    def integrate(self, p: Poly):
        """(value, stderr) of the integral of p; stderr uses the block covariance."""
        if self.blocks is None:
            v = sum((c * self.value(e) for e, c in p.terms.items()), Fraction(0)) \
                if self.method == EXACT else sum(float(c) * float(self.value(e)) for e, c in p.terms.items())
            return v, 0.0
        col = {e: i for i, e in enumerate(self.order)}
        w = np.zeros(len(self.order))
        for e, c in p.terms.items():
            w[col[tuple(e)]] += float(c)
        per_block = self.blocks @ w
        value = sum(float(c) * self.value(e) for e, c in p.terms.items())
        return float(value), float(per_block.std(ddof=1) / math.sqrt(len(per_block)))

    def to_json(self):
        return {
            "schema": "polydiff/1",
            "variables": list(self.variables),
            "method": self.method,
            "normalization": self.normalization,
            "moments": [
                {"exponent": list(e), "value": str(v) if isinstance(v, Fraction) else v,
                 "stderr": s, "method": m}
                for e, (v, s, m) in sorted(self.entries.items(), key=lambda kv: (sum(kv[0]), kv[0]))
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)


# ---------------------------------------------------------------------------
# closed forms


def rising(a, k):
    out = Fraction(1)
    for i in range(k):
        out *= a + i
    return out


def _beta_interval(a, b, k):
    """E[x^k] for density (1-x)^(a-1)(1+x)^(b-1) on (-1, 1)."""
    # x = 2u - 1 with u ~ Beta(b, a)
    total = Fraction(0)
    for j in range(k + 1):
        Eu = rising(b, j) / rising(a + b, j)
        total += math.comb(k, j) * Fraction(2) ** j * Eu * (-1) ** (k - j)
    return total


def _gamma(a, k):
    return rising(a, k)


def _gaussian(k):
    if k % 2:
        return Fraction(0)
    return Fraction(math.prod(range(k - 1, 0, -2)) if k else 1)


def _one_dim(family, params, k):
    if family == "interval-beta":
        return _beta_interval(Fraction(params["a"]), Fraction(params["b"]), k)
    if family == "gamma":
        return _gamma(Fraction(params["a"]), k)
    if family == "gaussian":
        return _gaussian(k)
    raise UnsupportedFamily(f"unknown one-dimensional family {family!r}")


def exact_moments(family: str, params: dict, max_degree: int, variables=None) -> MomentTable:
    """Exact rational moments of a classical family up to total degree ``max_degree``.

    Families: interval-beta(a, b), gamma(a), gaussian, product(factors),
    simplex-Dirichlet(alpha), ball-radial(p, r).
    """
    params = dict(params or {})
    if family in ("interval-beta", "gamma", "gaussian"):
        d = 1
        fn = lambda e: _one_dim(family, params, e[0])
    elif family == "product":
        fs = params["factors"]
        d = len(fs)
        fn = lambda e: math.prod((_one_dim(f, p, k) for (f, p), k in zip(fs, e)), start=Fraction(1))
    elif family == "simplex-Dirichlet":
        alpha = [Fraction(a) for a in params["alpha"]]
        d = len(alpha) - 1
        A = sum(alpha)

        def fn(e):
            num = math.prod((rising(a, k) for a, k in zip(alpha, e)), start=Fraction(1))
            return num / rising(A, sum(e))
    elif family == "ball-radial":
        p, r = int(params["p"]), Fraction(params["r"])
        d = p

        def fn(e):
            if any(k % 2 for k in e):
                return Fraction(0)
            half = [k // 2 for k in e]
            num = math.prod((rising(Fraction(1, 2), h) for h in half), start=Fraction(1))
            return num / rising(Fraction(p, 2) + r + 1, sum(half))
    else:
        raise UnsupportedFamily(f"no closed form for family {family!r}")
    vs = tuple(variables) if variables else (("x",) if d == 1 else tuple(f"x{i + 1}" for i in range(d)))
    entries = {e: (fn(e), 0.0, EXACT) for e in monomials_upto(d, max_degree)}
    return MomentTable(vs, entries, 1.0, EXACT)


def family_of(m: Model):
    """(family, params) of the exact reversible measure of a model, or None."""
    name = m.name
    b = m.boundary
    if name in ("hermite", "ou(1)"):
        return "gaussian", {}
    if name.startswith("ou(") and m.dimension > 1:
        return "product", {"factors": [("gaussian", {})] * m.dimension}
    if name == "laguerre":
        return "gamma", {"a": b.exponents[0] + 1}
    if name == "jacobi":
        return "interval-beta", {"a": b.exponents[0] + 1, "b": b.exponents[1] + 1}
    if name == "ball":
        return "ball-radial", {"p": m.dimension, "r": b.exponents[0]}
    if name in ("simplex", "triangle"):
        return "simplex-Dirichlet", {"alpha": [r + 1 for r in b.exponents]}
    if name == "square":
        r = b.exponents
        return "product", {"factors": [("interval-beta", {"a": r[0] + 1, "b": r[1] + 1}),
                                       ("interval-beta", {"a": r[2] + 1, "b": r[3] + 1})]}
    return None


def model_moments(m: Model, max_degree: int, method="auto", N=2**20, seed=0) -> MomentTable:
    fam = family_of(m)
    if method == "exact" or (method == "auto" and fam is not None):
        if fam is None:
            raise UnsupportedFamily(f"no closed-form moments for {m.name!r}")
        return exact_moments(fam[0], fam[1], max_degree, m.variables)
    return mc_moments(m, max_degree, N, seed)


# ---------------------------------------------------------------------------
# Monte Carlo


def bounding_box(m: Model, **kw):
    """Rational box containing the component of the interior point."""
    return _region(m, **kw).box_fractions()


_REGIONS = {}


def _region(m: Model, **kw) -> Region:
    if m.boundary is None or m.interior_point is None:
        raise UnsupportedFamily(f"model {m.name!r} has no bounded region")
    key = (m.boundary.factors, tuple(m.interior_point), tuple(sorted(kw.items())))
    r = _REGIONS.get(key)
    if r is None:
        r = _REGIONS[key] = Region(m.boundary.factors, m.interior_point, **kw)
    return r


def density_fn(m: Model):
    facs = [(f.lambdify(), float(r)) for f, r in zip(m.boundary.factors, m.boundary.exponents)]

    def rho(pts):
        out = np.ones(len(pts))
        for f, r in facs:
            if r:
                out *= np.abs(f(pts)) ** r
        return out

    return rho


def mc_moments(m: Model, max_degree: int, N: int = 2**20, seed: int = 0,
               n_blocks: int = N_BLOCKS) -> MomentTable:
    """Moments by importance-weighted scrambled Sobol sampling on the region box.

    The N points are split into ``n_blocks`` independently scrambled blocks;
    the standard error is the spread of the per-block ratio estimates.
    """
    b = m.boundary
    if b is None:
        raise UnsupportedFamily(f"model {m.name!r} has no boundary; use exact moments")
    if any(r <= -1 for r in b.exponents):
        raise NonIntegrable("density exponents must be > -1", exponents=[str(r) for r in b.exponents])
    if any(r < 0 for r in b.exponents):
        warnings.warn("negative density exponents: integrability near singular boundary points is assumed",
                      stacklevel=2)
    reg = _region(m)
    lo, hi = reg.box
    d = m.dimension
    order = monomials_upto(d, max_degree)
    E = np.array(order, dtype=float)
    rho = density_fn(m)
    per = max(2, int(N) // n_blocks)
    per = 1 << int(round(math.log2(per)))
    ss = np.random.SeedSequence([int(seed), 0x9D])
    children = ss.spawn(n_blocks)
    num = np.zeros((n_blocks, len(order)))
    den = np.zeros(n_blocks)
    accepted = 0
    chunk = 1 << 16
    for k, child in enumerate(children):
        sob = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(child))
        remaining = per
        while remaining:
            n = min(chunk, remaining)
            remaining -= n
            pts = lo + sob.random(n) * (hi - lo)
            inside = reg.contains(pts)
            p = pts[inside]
            accepted += len(p)
            if not len(p):
                continue
            w = rho(p)
            mons = np.prod(p[:, None, :] ** E[None, :, :], axis=2)
            num[k] += w @ mons
            den[k] += w.sum()
    rate = accepted / (per * n_blocks)
    if rate < 1e-4 or np.any(den == 0):
        raise DegenerateRegion(f"acceptance rate {rate:.2e} too small")
    est = num / den[:, None]
    pooled = num.sum(0) / den.sum()
    se = est.std(0, ddof=1) / math.sqrt(n_blocks)
    vol = float(np.prod(hi - lo))
    norm = float(den.sum() / (per * n_blocks) * vol)
    entries = {e: (float(pooled[i]), float(se[i]), MC) for i, e in enumerate(order)}
    return MomentTable(m.variables, entries, norm, MC, est, order, rate)
