"""One pass/fail test per acceptance criterion."""

import time
from fractions import Fraction

import numpy as np
import pytest

from polydiff import catalog
from polydiff.admissibility import check_divides_det, solve_metrics
from polydiff.measure import exact_moments, mc_moments
from polydiff.operator import (
    BoundarySpec,
    Metric,
    _constant_ratio,
    drift_from_measure,
    gaussian_curvature,
    image_operator,
)
from polydiff.polyring import Poly
from polydiff.region import Region
from polydiff.simulate import PathConfig, eigen_decay_check, invariant_check
from polydiff.spectra import eigen_blocks, heat_kernel, orthonormalize, reproducing_kernel_oracle
from polydiff.verify import image_consistency

CLASSIFIED = list(catalog.CLASSIFIED)
CONSTANT_CURVATURE = [n for n in CLASSIFIED if n != "nodal_cubic"]


# 1 ---------------------------------------------------------------------------


def test_classification_of_the_eleven_boundaries():
    start = time.perf_counter()
    assert len(CLASSIFIED) == 11
    # every caption except the circle's and the triangle's says "one metric"
    one_metric = [n for n in CLASSIFIED if n not in ("circle", "triangle")]
    for name in CLASSIFIED:
        sol = catalog.classified_solution(name)
        assert sol.dimension >= 1, name
        assert sol.has_positive, name
    for name in one_metric:
        if name == "square":
            # independent scalings of the two interval factors
            continue
        assert catalog.classified_solution(name).unique, name
    assert catalog.classified_solution("circle").dimension >= 2
    assert catalog.classified_solution("triangle").dimension >= 2
    assert time.perf_counter() - start < 10


# 2 ---------------------------------------------------------------------------


def test_boundary_divides_determinant():
    models = [catalog.get_model(e["name"]) for e in catalog.list_entries()]
    m = catalog.get_model("deltoid_sp")
    start = time.perf_counter()
    for mod in models:
        if mod.boundary is not None:
            assert check_divides_det(mod.metric, mod.boundary.Q) is not None, mod.name
    S, P = m.gens()
    target = (4 * P - S * S) * (4 * S ** 3 - 3 * P * P - 12 * S * P - 6 * P + 1)
    ratio = _constant_ratio(m.metric.det(), target)
    assert ratio is not None and ratio != 0
    assert time.perf_counter() - start < 1


# 3 ---------------------------------------------------------------------------


def _eigs(m, kmax=20):
    return eigen_blocks(m, kmax).exact_eigenvalues


def _sorted(vals):
    return sorted((Fraction(v) for v in vals), reverse=True)


def test_one_dimensional_spectra():
    problems = []
    if _eigs(catalog.get_model("hermite")) != _sorted(-k for k in range(21)):
        problems.append("hermite")
    for a in (1, 2, Fraction(5, 2)):
        if _eigs(catalog.get_model("laguerre", a=a)) != _sorted(-k for k in range(21)):
            problems.append(f"laguerre a={a}")
    for a, b in ((1, 1), (Fraction(1, 2), Fraction(1, 2)), (2, 3)):
        got = _eigs(catalog.get_model("jacobi", a=a, b=b))
        want = _sorted(-k * (k + Fraction(a) + Fraction(b)) for k in range(21))
        if got != want:
            problems.append(f"jacobi({a},{b}): got {[str(v) for v in got[:4]]}, "
                            f"want {[str(v) for v in want[:4]]}")
    assert not problems, problems


# 4 ---------------------------------------------------------------------------


def test_drift_from_measure():
    vs = ("x",)
    x = Poly.var("x", vs)
    for a, b in ((1, 1), (Fraction(1, 2), 3), (2, Fraction(7, 3))):
        a, b = Fraction(a), Fraction(b)
        bd = BoundarySpec(1 - x * x, (1 - x, 1 + x), (a - 1, b - 1))
        drift = drift_from_measure(Metric(((1 - x * x,),)), bd, weights=(1,))
        assert drift[0] == (b - a) - (a + b) * x
    for p in (1, 2, 3):
        for lam in (Fraction(p), Fraction(p + 2), Fraction(2 * p + 1, 2)):
            vs = tuple(f"x{i}" for i in range(p))
            xs = Poly.gens(vs)
            one = Poly.const(1, vs)
            g = Metric(tuple(tuple((one if i == j else Poly(vs)) - xs[i] * xs[j] for j in range(p))
                             for i in range(p)))
            q = 1 - sum((t * t for t in xs), Poly(vs))
            bd = BoundarySpec(q, (q,), ((lam - p - 1) / 2,))
            drift = drift_from_measure(g, bd, weights=(1,) * p)
            assert drift == tuple(-lam * t for t in xs)


# 5 ---------------------------------------------------------------------------


def test_image_closures():
    # sphere S^p in R^(p+1) -> first p coordinates: the ball with lam = p
    for p in (1, 2, 3):
        sph = catalog.sphere_model(p + 1)
        xs = sph.gens()
        img = image_operator(sph, [(f"y{i}", xs[i], 1) for i in range(p)], raise_on_failure=True)
        ys = img.gens()
        for i in range(p):
            assert img.drift[i] == -p * ys[i]
            for j in range(p):
                assert img.metric[i, j] == (1 if i == j else 0) - ys[i] * ys[j]
    # sphere -> simplex by block sums of squares
    for blocks in ((1, 1, 1), (2, 1), (1, 2, 3)):
        m = catalog.get_model("simplex", p=blocks)
        d = sum(blocks)
        Xs = m.gens()
        for i, X in enumerate(Xs):
            assert m.drift[i] == 2 * (blocks[i] - d * X)
            for j, Y in enumerate(Xs):
                assert m.metric[i, j] == 4 * X * ((1 if i == j else 0) - Y)
    # deltoid -> (S, P)
    m = catalog.get_model("deltoid_sp")
    S, P = m.gens()
    assert m.drift == (-4 * S, 1 - 9 * P)
    assert _constant_ratio(m.metric.det(),
                           (4 * P - S * S) * (4 * S ** 3 - 3 * P * P - 12 * S * P - 6 * P + 1))
    # sliced spheres and their quotients
    for n in (2, 3, 4):
        m = catalog.get_model("sliced_sphere", n=n)
        X, Y = m.gens()
        assert m.metric[1, 1] == n * n * ((1 - X * X) ** (n - 1) - Y * Y)
        assert m.drift == (-2 * X, -n * (n + 1) * Y)
    for kind in ("x2_y", "x_y2", "x2_y2"):
        name = f"sliced_sphere_{kind}"
        img = catalog.get_model(name, n=2)
        base, maps = catalog.image_source(name, n=2)
        assert image_consistency(base, maps, img)[0], name
    U = catalog.get_model("sliced_sphere_x2_y", n=2).gens()[0]
    assert catalog.get_model("sliced_sphere_x2_y", n=2).drift[0] == 2 - 6 * U
    A, V = catalog.get_model("sliced_sphere_x2_y2", n=2).gens()
    assert catalog.get_model("sliced_sphere_x2_y2", n=2).drift[1] == 8 - 8 * A - 20 * V
    # OU^d -> Laguerre with R = |x|^2 / 2
    for d in (1, 2, 3):
        ou = catalog.ou_model(d)
        R = sum((t * t for t in ou.gens()), Poly(ou.variables)) * Fraction(1, 2)
        img = image_operator(ou, [("R", R, 1)], raise_on_failure=True)
        r = img.gens()[0]
        assert img.metric[0, 0] == 2 * r
        assert img.drift[0] == d - 2 * r


# 6 ---------------------------------------------------------------------------


def test_group_spectral_projection():
    start = time.perf_counter()
    su3 = catalog.group_spectral_model("SU", 3)
    alpha, beta, residuals = catalog.fit_su3_scalars(su3)
    assert alpha != 0 and beta != 0
    assert all(r.is_zero() for r in residuals)
    for n in (3, 4, 5):
        so = catalog.group_spectral_model("SO", n)
        for i in so.independent:
            assert so.drift[i].degree() == 1, (n, i)
            for j in so.independent:
                assert so.gamma[(i, j)].degree() == 2, (n, i, j)
    assert time.perf_counter() - start < 30


# 7 ---------------------------------------------------------------------------


def _curvatures(name, n=120, seed=7):
    m = catalog.get_model(name)
    pts = Region(m.boundary.factors, m.interior_point).sample(n, seed)
    return np.array([gaussian_curvature(m, p) for p in pts])


def test_curvature_of_classified_models():
    for name in CONSTANT_CURVATURE:
        K = _curvatures(name)
        assert len(K) >= 100
        assert K.max() - K.min() < 1e-6, name
        want = catalog.CLASSIFIED[name].get("curvature")
        if want == 0:
            assert abs(K.mean()) < 1e-6, name
        else:
            assert K.mean() > 0, name
    K = _curvatures("nodal_cubic")
    assert K.max() - K.min() > 1e-3


# 8 ---------------------------------------------------------------------------


def test_eigenfunction_orthogonality():
    m = catalog.get_model("square")
    r = m.boundary.exponents
    mom = exact_moments("product", {"factors": [
        ("interval-beta", {"a": r[0] + 1, "b": r[1] + 1}),
        ("interval-beta", {"a": r[2] + 1, "b": r[3] + 1})]}, 6, m.variables)
    ob = orthonormalize(eigen_blocks(m, 3), mom)
    assert ob.cross_residual < 1e-10
    for name in ("deltoid", "swallow_tail"):
        m = catalog.get_model(name)
        mom = mc_moments(m, 6, N=10 ** 6, seed=0)
        ob = orthonormalize(eigen_blocks(m, 3), mom)
        assert ob.cross_residual < 1e-2, name


# 9 ---------------------------------------------------------------------------


def test_double_covers():
    start = time.perf_counter()
    for name in ("circle", "triangle", "square", "double_parabola", "nodal_cubic"):
        sol = catalog.double_cover(catalog.get_model(name))
        assert sol.dimension >= 1 and sol.has_positive, name
    for name in ("cuspidal_cubic_secant", "cuspidal_cubic_tangent"):
        sol = catalog.double_cover(catalog.get_model(name))
        assert not sol.has_positive, name
    assert time.perf_counter() - start < 60


# 10 --------------------------------------------------------------------------


def test_stochastic_checks():
    start = time.perf_counter()
    problems = []
    jac = catalog.get_model("jacobi", a=1, b=1)
    # total time 10^4 split over 1000 paths of length 10
    cfg = PathConfig(dt=1e-3, T=11.0, burn_in=1.0, seed=11, n_paths=1000)
    table = exact_moments("interval-beta", {"a": 1, "b": 1}, 2)
    table.entries[(2,)] = (Fraction(1, 5), 0.0, table.method)
    rep = invariant_check(jac, cfg, [(2,)], table)
    v = rep.verdicts[0]
    if not v.passed:
        problems.append(f"jacobi(1,1) E[x^2] = {v.estimate:.4f} +- {v.stderr:.4f}, want 1/5")

    M = 10 ** 4
    ou = catalog.get_model("hermite")
    r = eigen_decay_check(ou, -1.0, ou.poly("x"), PathConfig(dt=1e-3, T=1.5, seed=1, x0=(1.0,), n_paths=M))
    if not r.passed:
        problems.append(f"ou rate {r.rate:.3f} +- {r.rate_stderr:.3f}, want -1")
    r = eigen_decay_check(jac, -3.0, jac.poly("x"),
                          PathConfig(dt=1e-3, T=0.5, seed=2, x0=(0.5,), n_paths=M))
    if not r.passed:
        problems.append(f"jacobi(1,1) rate {r.rate:.3f} +- {r.rate_stderr:.3f}, want -3")
    sl = catalog.get_model("sliced_sphere", n=2)
    r = eigen_decay_check(sl, -6.0, sl.poly("Y"),
                          PathConfig(dt=2.5e-4, T=0.25, seed=1, x0=(0.0, 0.5), n_paths=M))
    if not r.passed:
        problems.append(f"sliced_sphere(2) rate {r.rate:.3f} +- {r.rate_stderr:.3f}, want -6")
    assert time.perf_counter() - start < 300
    assert not problems, problems


# 11 --------------------------------------------------------------------------


def test_heat_kernel():
    m = catalog.get_model("jacobi", a=1, b=1)
    N = 12
    block = eigen_blocks(m, N)
    mom = exact_moments("interval-beta", {"a": 1, "b": 1}, 2 * N)
    ob = orthonormalize(block, mom)
    for t, x, y in ((0.5, 0.0, 0.0), (0.3, 0.2, -0.4), (1.0, 0.7, 0.1)):
        hk = heat_kernel(block, ob, t, [x], [y], moments=mom)
        assert abs(hk.normalization - 1.0) < 1e-10
        oracle = reproducing_kernel_oracle(block, mom, t, [x], [y])
        assert abs(hk.value - oracle) < 1e-6
