from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from polydiff import catalog
from polydiff.errors import DegenerateAtPoint, DegreeViolation, DimensionMismatch, ParseError
from polydiff.operator import (
    BoundarySpec,
    Metric,
    Model,
    apply_L,
    chain_rule,
    complex_to_real,
    drift_from_measure,
    dumps,
    from_descriptor,
    gamma,
    gaussian_curvature,
    image_operator,
    infer_exponents,
    loads,
    to_descriptor,
)
from polydiff.polyring import Poly
from polydiff.verify import diffusion_identity, random_poly

XY = ("x", "y")


def P(text, vs=XY):
    return Poly.parse(text, vs)


def ball2():
    return Model(XY, Metric(((P("1-x^2"), P("-x*y")), (P("-x*y"), P("1-y^2")))),
                 (P("-3x"), P("-3y")))


class TestGenerator:
    def test_gamma_and_L(self):
        m = ball2()
        assert gamma(m, P("x"), P("y")) == P("-x*y")
        assert apply_L(m, P("x^2+y^2")) == P("4 - 8x^2 - 8y^2")

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_diffusion_identity(self, seed):
        for name in ("triangle", "deltoid", "sliced_sphere"):
            assert diffusion_identity(catalog.get_model(name), degree=3, trials=1, seed=seed)

    def test_chain_rule(self):
        import random

        m = ball2()
        rng = random.Random(3)
        f1, f2 = random_poly(XY, 2, rng), random_poly(XY, 2, rng)
        outer = Poly.parse("u^2 v - 3u + v^3", ("u", "v"))
        direct = apply_L(m, outer.compose([f1, f2]))
        assert chain_rule(m, [f1, f2], outer) == direct

    def test_degree_violation(self):
        with pytest.raises(DegreeViolation):
            Model(XY, Metric(((P("x^3"), P("0")), (P("0"), P("1")))), (P("0"), P("0")))
        with pytest.raises(DegreeViolation):
            Model(XY, Metric(((P("1"), P("0")), (P("0"), P("1")))), (P("x^2"), P("0")))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            Model(XY, Metric(((P("1"), P("0")), (P("0"), P("1")))), (P("0"),))

    def test_interior_point_on_boundary(self):
        q = P("1-x^2-y^2")
        with pytest.raises(ValueError):
            ball2().replace(boundary=BoundarySpec(q, (q,)), interior_point=(1, 0))


class TestMeasure:
    def test_jacobi_drift(self):
        x = Poly.var("x", ("x",))
        bd = BoundarySpec(1 - x * x, (1 - x, 1 + x), (Fraction(1, 2), 2))
        b = drift_from_measure(Metric(((1 - x * x,),)), bd)[0]
        # a = 3/2, b = 3
        assert b == Fraction(3, 2) - Fraction(9, 2) * x

    def test_laguerre_drift_with_exponential_weight(self):
        x = Poly.var("x", ("x",))
        bd = BoundarySpec(x, (x,), (Fraction(3, 2),))
        b = drift_from_measure(Metric(((x,),)), bd, (-x,))[0]
        assert b == Fraction(5, 2) - x

    def test_infer_exponents_round_trip(self):
        m = catalog.get_model("triangle", r=(Fraction(1, 2), 0, 2))
        assert infer_exponents(m.metric, m.boundary.factors, m.drift) == (Fraction(1, 2), 0, 2)

    def test_deltoid_sp_exponents(self):
        m = catalog.get_model("deltoid_sp")
        assert m.boundary.exponents == (Fraction(-1, 2), Fraction(1, 2))

    def test_sliced_exponents(self):
        assert catalog.get_model("sliced_sphere", n=2).boundary.exponents == (Fraction(-1, 2),) * 2
        assert catalog.get_model("sliced_sphere", n=3).boundary.exponents == (Fraction(-1, 2),)


class TestImages:
    def test_sphere_to_ball(self):
        sph = catalog.sphere_model(3)
        x1, x2, _ = sph.gens()
        img = image_operator(sph, [("u", x1, 1), ("v", x2, 1)], raise_on_failure=True)
        UV = ("u", "v")
        assert img.metric[0, 0] == Poly.parse("1-u^2", UV)
        assert img.metric[0, 1] == Poly.parse("-u v", UV)
        assert img.drift == (Poly.parse("-2u", UV), Poly.parse("-2v", UV))

    def test_non_closing_map(self):
        sph = catalog.sphere_model(3)
        x1, x2, x3 = sph.gens()
        assert image_operator(sph, [("u", x1 * x2, 1)]) is None

    def test_ou_to_laguerre(self):
        ou = catalog.ou_model(4)
        R = sum((t * t for t in ou.gens()), Poly(ou.variables)) * Fraction(1, 2)
        img = image_operator(ou, [("R", R, 1)], raise_on_failure=True)
        # twice the Laguerre operator with parameter d/2 = 2
        assert img.metric[0, 0] == Poly.parse("2R", ("R",))
        assert img.drift[0] == Poly.parse("4 - 2R", ("R",))


class TestComplex:
    def test_deltoid_real_form(self):
        m = catalog._deltoid_complex_model()
        x, y = m.gens()
        # Gamma(x,x) = Re(Gamma(Z,Z) + Gamma(Z,Zb)) / 2
        assert m.drift == (-4 * x, -4 * y)
        assert (m.metric.det() * 16).degree() == 4

    def test_inconsistent_data(self):
        C = ("Z", "Zb")
        with pytest.raises(ValueError):
            complex_to_real(Poly.parse("Zb", C), Poly.parse("Z", C), Poly.parse("Z", C))


class TestCurvature:
    def test_against_sympy_brioschi(self):
        x, y = sympy.symbols("x y")
        H = sympy.Matrix([[1 - x ** 2 + x * y / 3, -x * y], [-x * y, 2 - y ** 2]])
        G = H.inv()
        E, F, Gg = G[0, 0], G[0, 1], G[1, 1]
        d = sympy.diff
        A = sympy.Matrix([
            [-d(E, y, 2) / 2 + d(F, x, y) - d(Gg, x, 2) / 2, d(E, x) / 2, d(F, x) - d(E, y) / 2],
            [d(F, y) - d(Gg, x) / 2, E, F],
            [d(Gg, y) / 2, F, Gg]])
        B = sympy.Matrix([[0, d(E, y) / 2, d(Gg, x) / 2], [d(E, y) / 2, E, F], [d(Gg, x) / 2, F, Gg]])
        K = (A.det() - B.det()) / (E * Gg - F ** 2) ** 2
        pt = (sympy.Rational(1, 5), sympy.Rational(-1, 3))
        want = sympy.nsimplify(K.subs({x: pt[0], y: pt[1]}))
        m = Model(XY, Metric(((P("1 - x^2 + 1/3 x y"), P("-x y")), (P("-x y"), P("2 - y^2")))),
                  (P("0"), P("0")))
        got = gaussian_curvature(m, (Fraction(1, 5), Fraction(-1, 3)), exact=True)
        assert sympy.Rational(got.numerator, got.denominator) == want

    def test_round_sphere_and_flat(self):
        assert gaussian_curvature(ball2(), (Fraction(1, 3), Fraction(1, 4)), exact=True) == 1
        flat = Model(XY, Metric(((P("1"), P("0")), (P("0"), P("1")))), (P("0"), P("0")))
        assert gaussian_curvature(flat, (0, 0), exact=True) == 0

    def test_degenerate_point(self):
        with pytest.raises(DegenerateAtPoint):
            gaussian_curvature(ball2(), (1, 0))


class TestDescriptor:
    @pytest.mark.parametrize("name", ["jacobi", "triangle", "deltoid_sp", "ball", "laguerre"])
    def test_round_trip(self, name):
        m = catalog.get_model(name)
        back = loads(dumps(m))
        assert to_descriptor(back) == to_descriptor(m)
        assert back.boundary.exponents == m.boundary.exponents

    def test_bad_schema(self):
        d = to_descriptor(catalog.get_model("jacobi"))
        d["schema"] = "other/2"
        with pytest.raises(ParseError):
            from_descriptor(d)

    def test_missing_field(self):
        d = to_descriptor(catalog.get_model("jacobi"))
        del d["drift"]
        with pytest.raises(ParseError):
            from_descriptor(d)
