import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dyrac.errors import DomainError
from dyrac.geometry import (
    DesignParams, configuration, crank_angle_for_radius, radius_for_crank_angle,
    spring_deflection, spring_lever, triangle_angles,
)

from conftest import MM, construct_points, vector_angle


def crank_point_radius(params, delta):
    # O at origin, B on +x, P at angle delta from BO measured at B
    B = np.array([params.a, 0.0])
    P = B + params.r_D * np.array([-math.cos(delta), math.sin(delta)])
    return float(np.hypot(*P))


class TestDesignParams:
    def test_defaults(self, params):
        assert params.r_min == pytest.approx(0.5 * MM)
        assert params.r_max == pytest.approx(19.5 * MM)

    @pytest.mark.parametrize("kw", [
        dict(r_D=0.0), dict(k=-1.0), dict(a=0.010), dict(l=0.019), dict(a=float("nan")),
    ])
    def test_rejects_invalid(self, kw):
        with pytest.raises(DomainError):
            DesignParams(**kw)


class TestRadiusForCrankAngle:
    def test_collinear_ends(self, params):
        assert radius_for_crank_angle(params, 0.0) == pytest.approx(0.5 * MM, abs=1e-15)
        assert radius_for_crank_angle(params, math.pi) == pytest.approx(19.5 * MM, abs=1e-15)

    def test_right_angle_matches_construction(self, params):
        r = radius_for_crank_angle(params, math.pi / 2)
        assert r == pytest.approx(crank_point_radius(params, math.pi / 2), rel=1e-14)
        assert r == pytest.approx(13.793 * MM, abs=0.0005 * MM)

    @pytest.mark.parametrize("delta", np.linspace(0.05, 3.1, 9))
    def test_matches_construction(self, params, delta):
        assert radius_for_crank_angle(params, delta) == pytest.approx(
            crank_point_radius(params, delta), rel=1e-12)

    def test_strictly_increasing(self, params):
        deltas = np.linspace(0.0, math.pi, 2001)
        r = [radius_for_crank_angle(params, d) for d in deltas]
        assert np.all(np.diff(r) > 0)

    @pytest.mark.parametrize("delta", [-0.01, math.pi + 0.01])
    def test_out_of_range(self, params, delta):
        with pytest.raises(DomainError):
            radius_for_crank_angle(params, delta)


class TestCrankAngleForRadius:
    def test_ends(self, params):
        assert crank_angle_for_radius(params, 19.5 * MM) == pytest.approx(math.pi, abs=1e-7)
        assert crank_angle_for_radius(params, 0.5 * MM) == pytest.approx(0.0, abs=1e-7)

    def test_right_angle_round_trip(self, params):
        r = crank_point_radius(params, math.pi / 2)
        assert crank_angle_for_radius(params, r) == pytest.approx(math.pi / 2, abs=1e-12)
        assert crank_angle_for_radius(params, 13.793 * MM) == pytest.approx(math.pi / 2, abs=1e-4)

    def test_round_trip_grid(self, params):
        for delta in np.linspace(1e-6, math.pi - 1e-6, 1000):
            r = radius_for_crank_angle(params, delta)
            assert abs(crank_angle_for_radius(params, r) - delta) < 1e-9

    @given(st.floats(0.5e-3, 19.5e-3))
    def test_radius_round_trip(self, r):
        params = DesignParams()
        back = radius_for_crank_angle(params, crank_angle_for_radius(params, r))
        assert back == pytest.approx(r, rel=1e-12, abs=1e-12 * params.r_max)

    @pytest.mark.parametrize("r", [0.4 * MM, 19.6 * MM])
    def test_outside_band_names_band(self, params, r):
        with pytest.raises(DomainError, match="reachable band"):
            crank_angle_for_radius(params, r)


class TestTriangleAngles:
    def test_example_6p9mm(self, params):
        phi_d, eps, gamma, delta = triangle_angles(params, 6.9 * MM)
        O, B, P, _ = construct_points(params, 6.9 * MM, 0.0)
        assert phi_d == pytest.approx(vector_angle(B - P, O - P), abs=1e-12)
        assert eps == pytest.approx(vector_angle(B - O, P - O), abs=1e-12)
        assert delta == pytest.approx(vector_angle(O - B, P - B), abs=1e-12)
        assert gamma == pytest.approx(math.pi / 2 - delta, abs=1e-15)
        # values as printed (4 decimals, rounded)
        for got, printed in zip((phi_d, eps, gamma, delta), (1.1421, 1.2777, 0.8490, 0.7218)):
            assert got == pytest.approx(printed, abs=5e-4)

    def test_right_angle_law_of_sines(self, params):
        r = radius_for_crank_angle(params, math.pi / 2)
        phi_d, eps, _, delta = triangle_angles(params, r)
        assert delta == pytest.approx(math.pi / 2, abs=1e-12)
        assert math.sin(eps) == pytest.approx(params.r_D / params.a * math.sin(phi_d), rel=1e-12)

    def test_collinear_top(self, params):
        phi_d, eps, _, delta = triangle_angles(params, 19.5 * MM)
        assert phi_d == pytest.approx(0.0, abs=1e-7)
        assert eps == pytest.approx(0.0, abs=1e-7)
        assert delta == pytest.approx(math.pi, abs=1e-7)

    def test_angle_sum(self, params):
        for r in np.linspace(params.r_min, params.r_max, 500):
            phi_d, eps, _, delta = triangle_angles(params, r)
            assert abs(phi_d + eps + delta - math.pi) < 1e-12

    def test_arcsin_branches(self, params):
        threshold = math.sqrt(params.r_D ** 2 - params.a ** 2)
        for r in np.linspace(params.r_min + 1e-7, params.r_max - 1e-7, 400):
            if abs(r - threshold) < 1e-9:
                continue
            phi_d, eps, _, _ = triangle_angles(params, r)
            principal = math.asin(min(1.0, params.r_D / params.a * math.sin(phi_d)))
            expected = principal if r > threshold else math.pi - principal
            assert eps == pytest.approx(expected, abs=1e-9)

    def test_phi_d_peaks_and_is_not_monotone(self, params):
        threshold = math.sqrt(params.r_D ** 2 - params.a ** 2)
        assert threshold == pytest.approx(3.122 * MM, abs=0.001 * MM)
        phi_peak = triangle_angles(params, threshold)[0]
        assert phi_peak == pytest.approx(math.asin(params.a / params.r_D), abs=1e-9)
        assert math.degrees(phi_peak) == pytest.approx(71.8, abs=0.05)


class TestSpringLever:
    def test_zero_deflection(self, params):
        assert spring_lever(params, 10 * MM, 0.0) == pytest.approx(10 * MM, abs=1e-15)
        assert spring_lever(params, 19.5 * MM, 0.0) == pytest.approx(0.5 * MM, abs=1e-15)

    def test_example_matches_distance(self, params):
        _, _, P, A = construct_points(params, 6.9 * MM, 0.3)
        c = spring_lever(params, 6.9 * MM, 0.3)
        assert c == pytest.approx(float(np.linalg.norm(A - P)), rel=1e-14)
        assert c == pytest.approx(13.562 * MM, abs=0.0005 * MM)

    @given(st.floats(0.5e-3, 19.5e-3), st.floats(0.0, 1.5))
    def test_even_in_alpha(self, r, alpha):
        params = DesignParams()
        assert spring_lever(params, r, alpha) == spring_lever(params, r, -alpha)
        assert spring_lever(params, r, alpha) > 0


class TestSpringDeflection:
    def test_zero(self, params):
        for r in (1 * MM, 10 * MM, 19 * MM):
            assert spring_deflection(params, r, 0.0) == 0.0

    def test_small_angle_slope(self, params):
        assert spring_deflection(params, 10 * MM, 1e-3) == pytest.approx(1e-3, abs=1e-6)

    def test_matches_cosine_law_and_construction(self, params):
        r, alpha = 6.9 * MM, 0.3
        O, _, P, A = construct_points(params, r, alpha)
        c = spring_lever(params, r, alpha)
        cos_law = math.acos((c * c + params.l ** 2 - r * r) / (2 * c * params.l))
        theta = spring_deflection(params, r, alpha)
        assert theta == pytest.approx(vector_angle(O - A, P - A), abs=1e-12)
        assert theta == pytest.approx(cos_law, abs=1e-12)
        assert theta == pytest.approx(0.1509, abs=1e-4)

    @pytest.mark.parametrize("r", [1 * MM, 6.9 * MM, 15 * MM])
    def test_small_angle_slope_general(self, params, r):
        slope = spring_deflection(params, r, 1e-7) / 1e-7
        assert slope == pytest.approx(r / (params.l - r), rel=1e-6)

    @given(st.floats(0.5e-3, 19.5e-3), st.floats(0.0, 1.5))
    def test_even_and_non_negative(self, r, alpha):
        params = DesignParams()
        theta = spring_deflection(params, r, alpha)
        assert theta >= 0
        assert theta == spring_deflection(params, r, -alpha)
        assert theta <= math.pi


def test_configuration_bundle(params):
    cfg = configuration(params, 6.9 * MM, 0.3)
    assert cfg.beta == pytest.approx(math.pi / 2 - 0.3 - cfg.theta)
    assert cfg.phi_d + cfg.epsilon + cfg.delta == pytest.approx(math.pi, abs=1e-12)
    assert abs(params.l - cfg.c) <= cfg.r <= params.l + cfg.c
