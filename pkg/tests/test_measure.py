import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from polydiff import catalog
from polydiff.errors import NonIntegrable, ParamOutOfRange, UnsupportedFamily
from polydiff.measure import exact_moments, mc_moments, model_moments, rising
from polydiff.operator import apply_L
from polydiff.verify import random_poly

halves = st.integers(1, 8).map(lambda n: Fraction(n, 2))


class TestClosedForms:
    def test_rising(self):
        assert rising(Fraction(1, 2), 3) == Fraction(15, 8)
        assert rising(3, 0) == 1

    @given(halves, halves, st.integers(0, 6))
    @settings(max_examples=30, deadline=None)
    def test_interval_beta_against_quadrature(self, a, b, k):
        f = lambda x: (1 - x) ** float(a - 1) * (1 + x) ** float(b - 1)
        z = integrate.quad(f, -1, 1)[0]
        want = integrate.quad(lambda x: x ** k * f(x), -1, 1)[0] / z
        got = exact_moments("interval-beta", {"a": a, "b": b}, 6).value((k,))
        assert abs(float(got) - want) < 1e-7

    @given(halves, st.integers(0, 5))
    @settings(max_examples=20, deadline=None)
    def test_gamma(self, a, k):
        f = lambda x: x ** float(a - 1) * math.exp(-x)
        want = integrate.quad(lambda x: x ** k * f(x), 0, np.inf)[0] / math.gamma(float(a))
        got = exact_moments("gamma", {"a": a}, 5).value((k,))
        assert abs(float(got) - want) < 1e-6 * max(1, want)

    def test_gaussian(self):
        t = exact_moments("gaussian", {}, 8)
        assert [t.value((k,)) for k in range(9)] == [1, 0, 1, 0, 3, 0, 15, 0, 105]

    def test_dirichlet(self):
        t = exact_moments("simplex-Dirichlet", {"alpha": [1, 1, 1]}, 2)
        assert t.value((1, 1)) == Fraction(1, 12)
        assert t.value((2, 0)) == Fraction(1, 6)
        assert t.value((1, 0)) == Fraction(1, 3)

    def test_ball_radial_uniform_disc(self):
        # uniform disc: E[x^2] = 1/4, E[x^2 y^2] = 1/24
        t = exact_moments("ball-radial", {"p": 2, "r": 0}, 4)
        assert t.value((2, 0)) == Fraction(1, 4)
        assert t.value((2, 2)) == Fraction(1, 24)
        assert t.value((1, 1)) == 0

    def test_unknown_family(self):
        with pytest.raises(UnsupportedFamily):
            exact_moments("cauchy", {}, 2)


class TestModelMoments:
    def test_families(self):
        assert model_moments(catalog.get_model("ball", p=2, lam=3), 2).value((2, 0)) == Fraction(1, 4)
        assert model_moments(catalog.get_model("laguerre", a=2), 2).value((1,)) == 2
        assert model_moments(catalog.get_model("jacobi", a=1, b=1), 2).value((2,)) == Fraction(1, 3)

    def test_exact_integral_of_L_vanishes(self):
        import random

        rng = random.Random(0)
        for name, params in (("jacobi", {"a": 2, "b": Fraction(1, 2)}), ("laguerre", {"a": 3}),
                             ("triangle", {"r": (1, 0, Fraction(1, 2))}), ("square", {}),
                             ("ball", {"p": 3, "lam": 5})):
            m = catalog.get_model(name, **params)
            t = model_moments(m, 6)
            for _ in range(3):
                f = random_poly(m.variables, 4, rng)
                assert t.integrate(apply_L(m, f))[0] == 0, name

    def test_exact_requires_family(self):
        with pytest.raises(UnsupportedFamily):
            model_moments(catalog.get_model("deltoid"), 2, method="exact")


class TestMonteCarlo:
    def test_against_exact_triangle(self):
        m = catalog.get_model("triangle", r=(Fraction(1, 2), 0, 1))
        ex = model_moments(m, 4)
        mc = mc_moments(m, 4, N=2 ** 18, seed=3)
        for e in ex.entries:
            if sum(e) == 0:
                continue
            z = (mc.value(e) - float(ex.value(e))) / mc.stderr(e)
            assert abs(z) < 4, (e, z)

    @pytest.mark.parametrize("name", ["deltoid", "swallow_tail", "nodal_cubic"])
    def test_integration_by_parts(self, name):
        import random

        m = catalog.get_model(name)
        mc = mc_moments(m, 5, N=2 ** 18, seed=1)
        rng = random.Random(5)
        for _ in range(3):
            f = random_poly(m.variables, 3, rng)
            v, se = mc.integrate(apply_L(m, f))
            assert se > 0
            assert abs(v) < 4 * se, (v, se)

    def test_non_integrable(self):
        with pytest.raises(ParamOutOfRange):
            catalog.get_model("triangle", r=(-1, 0, 0))
        m = catalog.get_model("triangle")
        m = m.replace(boundary=m.boundary.with_exponents((-1, 0, 0)))
        with pytest.raises(NonIntegrable):
            mc_moments(m, 2, N=2 ** 12)

    def test_negative_exponent_warns(self):
        m = catalog.get_model("triangle", r=(Fraction(-1, 2), 0, 0))
        with pytest.warns(UserWarning):
            mc_moments(m, 1, N=2 ** 12)

    def test_reproducible(self):
        m = catalog.get_model("deltoid")
        a = mc_moments(m, 2, N=2 ** 14, seed=9)
        b = mc_moments(m, 2, N=2 ** 14, seed=9)
        assert a.entries == b.entries

    def test_json(self):
        t = mc_moments(catalog.get_model("deltoid"), 2, N=2 ** 14)
        data = json.loads(t.dumps())
        assert data["method"] == t.method
        assert len(data["moments"]) == 6
        assert all({"exponent", "value", "stderr", "method"} <= set(r) for r in data["moments"])
