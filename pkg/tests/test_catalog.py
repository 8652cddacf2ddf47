from fractions import Fraction

import numpy as np
import pytest

from polydiff import catalog
from polydiff.errors import ParamOutOfRange, ParseError, UnknownName
from polydiff.operator import apply_L, gamma
from polydiff.polyring import Poly
from polydiff.region import Region
from polydiff.operator import gaussian_curvature


class TestListing:
    def test_entries(self):
        names = [e["name"] for e in catalog.list_entries()]
        assert len(names) == len(set(names))
        classified = [e for e in catalog.list_entries() if "classified-2D" in e["tags"]]
        assert len(classified) == 11
        assert all(e["caption"] for e in classified)
        for core in ("hermite", "laguerre", "jacobi", "ball", "simplex", "deltoid_sp",
                     "sliced_sphere", "sliced_sphere_x2_y2"):
            assert core in names

    def test_captions_parse_to_boundaries(self):
        for name in catalog.CLASSIFIED:
            m = catalog.get_model(name)
            cap = catalog._subst_a(catalog.CLASSIFIED[name]["caption"], 1)
            assert m.boundary.Q == Poly.parse(cap, m.variables), name

    def test_double_parabola_parameter(self):
        m = catalog.get_model("double_parabola", a=Fraction(1, 2))
        assert m.boundary.Q == Poly.parse("(y+1-x^2)(y-1+1/2 x^2)", m.variables)

    def test_expected_facts(self):
        kinds = [f["kind"] for f in catalog.expected_facts("deltoid")]
        assert kinds == ["boundary", "metric", "curvature"]


class TestParams:
    def test_string_values(self):
        m = catalog.get_model("jacobi", a="1/2", b="2")
        assert m.drift[0] == Poly.parse("3/2 - 5/2 x", ("x",))

    @pytest.mark.parametrize("kw, err", [
        (dict(name="jacobi", a=-1), ParamOutOfRange),
        (dict(name="jacobi", a="x"), ParseError),
        (dict(name="jacobi", c=1), ParamOutOfRange),
        (dict(name="ball", p=2, lam=1), ParamOutOfRange),
        (dict(name="sliced_sphere", n=1), ParamOutOfRange),
        (dict(name="sliced_sphere", n="3/2"), ParamOutOfRange),
        (dict(name="triangle", r=(1, 2)), ParamOutOfRange),
        (dict(name="nonexistent"), UnknownName),
    ])
    def test_errors(self, kw, err):
        with pytest.raises(err):
            catalog.get_model(**kw)

    def test_measure_exponents(self):
        m = catalog.get_model("triangle", r="1/2,0,2")
        assert m.boundary.exponents == (Fraction(1, 2), 0, 2)


class TestOneDimensional:
    def test_laguerre(self):
        m = catalog.get_model("laguerre", a=Fraction(5, 2))
        assert m.drift[0] == Poly.parse("5/2 - x", ("x",))

    def test_ball_gamma(self):
        m = catalog.get_model("ball", p=3, lam=5)
        x1, x2, _ = m.gens()
        assert gamma(m, x1, x2) == -x1 * x2
        assert apply_L(m, x1) == -5 * x1


CURVATURE = {
    "triangle": 0.25, "square": 0, "circle": 1, "double_parabola": 1,
    "parabola_tangent_secant": 0.25, "parabola_two_tangents": 0, "cuspidal_cubic_secant": 1,
    "cuspidal_cubic_tangent": 0.5, "swallow_tail": 2, "deltoid": 0,
}


@pytest.mark.parametrize("name", list(CURVATURE))
def test_curvature_values(name):
    m = catalog.get_model(name)
    pts = Region(m.boundary.factors, m.interior_point).sample(10, 5)
    K = [gaussian_curvature(m, p) for p in pts]
    assert np.allclose(K, CURVATURE[name], atol=1e-9)


def test_pinned_metrics_are_solutions():
    for name, rows in catalog.PINNED.items():
        m = catalog.get_model(name)
        for i in range(2):
            for j in range(2):
                assert m.metric[i, j] == Poly.parse(rows[i][j], m.variables)


class TestGroupModels:
    def test_su2(self):
        su2 = catalog.group_spectral_model("SU", 2)
        a1 = Poly.var("a1", su2.variables)
        assert su2.gamma[(1, 1)] == 4 - a1 * a1
        assert su2.drift[1] == -3 * a1

    def test_so3(self):
        so3 = catalog.group_spectral_model("SO", 3)
        a1 = Poly.var("a1", so3.variables)
        assert so3.gamma[(1, 1)] == 3 - 2 * a1 - a1 * a1
        assert so3.drift[1] == -2 * a1

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_so_drifts(self, n):
        so = catalog.group_spectral_model("SO", n)
        for i in so.independent:
            assert so.drift[i] == -i * (n - i) * Poly.var(f"a{i}", so.variables)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_su_conjugate_consistency(self, n):
        # the constructor raises if Gamma(a_i, conj a_j) and Gamma(a_i, a_{n-j}) disagree
        su = catalog.group_spectral_model("SU", n)
        assert len(su.gamma_conj) == (n - 1) ** 2

    def test_su3_fit(self):
        alpha, beta, res = catalog.fit_su3_scalars(catalog.group_spectral_model("SU", 3))
        assert (alpha, beta) == (3, Fraction(1, 2))
        assert all(r.is_zero() for r in res)

    def test_real_models_positive_at_interior(self):
        for group, n in (("SO", 3), ("SO", 4), ("SO", 5), ("SU", 2), ("SU", 3)):
            m = catalog.group_spectral_model(group, n).real_model
            x0 = np.array([[float(v) for v in m.interior_point]])
            assert np.linalg.eigvalsh(m.metric_at(x0)).min() > 0, (group, n)

    def test_unknown_group(self):
        with pytest.raises(UnknownName):
            catalog.group_spectral_model("Sp", 2)
        with pytest.raises(ParamOutOfRange):
            catalog.group_spectral_model("SO", 1)


class TestDoubleCover:
    def test_triangle(self):
        sol = catalog.double_cover(catalog.get_model("triangle"))
        assert sol.dimension == 1 and sol.has_positive

    def test_cuspidal_empty(self):
        sol = catalog.double_cover(catalog.get_model("cuspidal_cubic_tangent"))
        assert sol.dimension == 0
