from fractions import Fraction

import numpy as np
import pytest

from polydiff import catalog
from polydiff.admissibility import (
    build_system,
    check_divides_det,
    failing_factor,
    per_factor_cofactors,
    residual,
    solve_metrics,
)
from polydiff.errors import EmptySolution, NotAdmissible
from polydiff.operator import Metric
from polydiff.polyring import Poly
from polydiff.region import Region, find_interior_rational

XY = ("x", "y")


def P(text, vs=XY):
    return Poly.parse(text, vs)


class TestSystem:
    @pytest.mark.parametrize("q, eqs", [("1-x^2-y^2", 20), ("x*y*(1-x-y)", 28),
                                        ("y^2-x^2*(1-x)", 24)])
    def test_sizes(self, q, eqs):
        # 3 metric entries of degree <= 2 and 2 affine cofactors: 18 + 6 unknowns;
        # equations: both components up to degree deg(Q) + 1
        s = build_system(P(q))
        assert s.n_unknowns == 24
        assert s.n_equations == eqs

    def test_basis_vectors_solve_the_equation(self):
        sol = solve_metrics(P("x*y*(1-x-y)"), (1, 1), (Fraction(1, 4), Fraction(1, 4)))
        for g, L in sol.basis:
            assert all(r.is_zero() for r in residual(g, L, sol.Q))


class TestKnownDimensions:
    @pytest.mark.parametrize("name, dim", [("circle", 4), ("triangle", 3), ("square", 2),
                                           ("deltoid", 1), ("swallow_tail", 1), ("nodal_cubic", 1)])
    def test_dimension(self, name, dim):
        assert catalog.classified_solution(name).dimension == dim

    def test_square_cone(self):
        sol = catalog.classified_solution("square")
        assert sol.has_positive and not sol.unique
        assert sol.free_directions == 1

    def test_circle_rotation_ray(self):
        sol = catalog.classified_solution("circle")
        rot = Metric(tuple(tuple(P(s) for s in row)
                           for row in catalog.OPTIONAL_RAYS["circle"]["rotation term"]))
        L = per_factor_cofactors(rot, [sol.Q])[0]
        assert all(r.is_zero() for r in residual(rot, L, sol.Q))


class TestNegative:
    def test_generic_cubic_has_no_metric(self):
        sol = solve_metrics(P("y^2 - x^3 - x - 1 + x*y"), allow_empty=True)
        assert sol.dimension == 0
        with pytest.raises(EmptySolution):
            solve_metrics(P("y^2 - x^3 - x - 1 + x*y"))

    def test_cofactor_failure(self):
        g = Metric(((P("1"), P("0")), (P("0"), P("1"))))
        with pytest.raises(NotAdmissible):
            per_factor_cofactors(g, [P("1-x^2-y^2")])
        h = Metric(((P("x"), P("0")), (P("0"), P("1"))))
        assert failing_factor(h, [P("x"), P("1-x^2-y^2")]) == 1

    def test_indefinite_without_interior(self):
        sol = solve_metrics(P("1-x^2-y^2"), (1, 1))
        assert sol.report()["verdict"] == "positivity not checked"


class TestDivisibility:
    @pytest.mark.parametrize("name", list(catalog.CLASSIFIED))
    def test_boundary_divides_det(self, name):
        m = catalog.get_model(name)
        assert check_divides_det(m.metric, m.boundary.Q) is not None

    def test_positive_on_region(self):
        for name in catalog.CLASSIFIED:
            m = catalog.get_model(name)
            pts = Region(m.boundary.factors, m.interior_point).sample(200, 3)
            assert np.linalg.eigvalsh(m.metric_at(pts)).min() > 0, name


class TestRegion:
    @pytest.mark.parametrize("name, area", [("nodal_cubic", 8 / 15), ("circle", np.pi),
                                            ("triangle", 0.5), ("square", 4.0)])
    def test_area(self, name, area):
        m = catalog.get_model(name)
        r = Region(m.boundary.factors, m.interior_point)
        _, rate = r.sample(20000, 1, return_rate=True)
        assert abs(rate * r.volume_box - area) < 0.01 * area

    def test_component_selection(self):
        # y^2 = x^2 (1 - x): the loop 0 < x < 1, not the unbounded part x < 0
        m = catalog.get_model("nodal_cubic")
        r = Region(m.boundary.factors, m.interior_point)
        lo, hi = r.box
        assert lo[0] > -0.05 and hi[0] < 1.05
        assert not r.contains([[-0.5, 0.0]])[0]

    def test_find_interior(self):
        pt = find_interior_rational(P("1-x^2-y^2"), (0.3, 0.2))
        assert all(isinstance(v, Fraction) for v in pt)
        assert 1 - pt[0] ** 2 - pt[1] ** 2 > 0
