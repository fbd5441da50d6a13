import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplaw.barriers import (
    RadialDomainError,
    RadialProfile,
    barrier_flux_bound,
    beta_exponent,
    fit_two_point,
    plaplace_residual,
    radial_eval,
    radial_gradient,
)
from gaplaw.geometry import ParticlePair


class TestRadialProfile:
    def test_branch_selection(self):
        assert RadialProfile(a=1, b=0, p=2, d=2).branch == "log"
        assert RadialProfile(a=1, b=0, p=3, d=3).branch == "log"
        assert RadialProfile(a=1, b=0, p=3, d=2).branch == "power"
        assert RadialProfile(a=1, b=0, p=2, d=3).branch == "power"

    def test_beta(self):
        assert beta_exponent(3, 2) == pytest.approx(0.5)
        assert beta_exponent(2, 3) == pytest.approx(-1.0)
        assert beta_exponent(4, 3) == pytest.approx(1.0 / 3.0)


class TestRadialEval:
    def test_constant_profile(self):
        prof = RadialProfile(a=0.0, b=2.5, p=3, d=2)
        for r in (0.1, 1.0, 7.0):
            assert radial_eval(prof, r) == 2.5

    def test_power_substitution(self):
        prof = RadialProfile(a=2.0, b=1.0, p=3, d=2)  # beta = 1/2
        assert radial_eval(prof, 4.0) == pytest.approx(5.0)

    def test_log_branch(self):
        prof = RadialProfile(a=1.0, b=0.0, p=2, d=2)
        assert radial_eval(prof, math.e) == pytest.approx(1.0)

    def test_domain_error(self):
        prof = RadialProfile(a=1.0, b=0.0, p=3, d=2)
        with pytest.raises(RadialDomainError):
            radial_eval(prof, 0.0)
        with pytest.raises(RadialDomainError):
            radial_gradient(prof, -1.0)


class TestFitTwoPoint:
    def test_constant_data(self):
        prof = fit_two_point(1.0, 0.7, 2.0, 0.7, p=3, d=2)
        assert prof.a == 0.0
        assert prof.b == 0.7

    def test_hand_solved_system(self):
        # p=3, d=2 (beta=1/2): a (2 - 1) = 1, b = -a
        prof = fit_two_point(1.0, 0.0, 4.0, 1.0, p=3, d=2)
        assert prof.a == pytest.approx(1.0)
        assert prof.b == pytest.approx(-1.0)

    def test_degenerate_interval(self):
        with pytest.raises(RadialDomainError):
            fit_two_point(1.0, 0.0, 1.0, 1.0, p=3, d=2)

    @given(
        r1=st.floats(0.05, 1.0),
        dr=st.floats(0.1, 5.0),
        v1=st.floats(-2.0, 2.0),
        v2=st.floats(-2.0, 2.0),
        p=st.sampled_from([2.0, 2.5, 3.0, 4.0, 6.0]),
        d=st.sampled_from([2, 3]),
    )
    @settings(max_examples=80)
    def test_round_trip(self, r1, dr, v1, v2, p, d):
        r2 = r1 + dr
        prof = fit_two_point(r1, v1, r2, v2, p, d)
        span = max(abs(v1), abs(v2), 1.0)
        assert radial_eval(prof, r1) == pytest.approx(v1, abs=1e-12 * span)
        assert radial_eval(prof, r2) == pytest.approx(v2, abs=1e-12 * span)

    @given(
        r1=st.floats(0.05, 1.0),
        dr=st.floats(0.1, 5.0),
        p=st.sampled_from([2.5, 3.0, 4.0]),
        d=st.sampled_from([2, 3]),
    )
    @settings(max_examples=40)
    def test_fit_sign_tracks_data(self, r1, dr, p, d):
        # increasing data with beta > 0 gives a > 0; beta < 0 flips the sign
        prof = fit_two_point(r1, 0.0, r1 + dr, 1.0, p, d)
        beta = beta_exponent(p, d)
        if beta > 0:
            assert prof.a > 0
        elif beta < 0:
            assert prof.a < 0


class TestRadialGradient:
    def test_zero_amplitude(self):
        assert radial_gradient(RadialProfile(a=0, b=1, p=3, d=2), 0.5) == 0.0

    def test_power_value(self):
        assert radial_gradient(RadialProfile(a=1, b=0, p=3, d=2), 1.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("p,d", [(3, 2), (4, 3), (2, 2)])
    def test_matches_finite_difference(self, p, d):
        prof = RadialProfile(a=1.3, b=-0.2, p=p, d=d)
        r, h = 0.7, 1e-6
        fd = (radial_eval(prof, r + h) - radial_eval(prof, r - h)) / (2 * h)
        assert radial_gradient(prof, r) == pytest.approx(fd, rel=1e-6)


class TestPLaplaceResidual:
    def test_zero_amplitude(self):
        assert plaplace_residual(RadialProfile(a=0, b=1, p=3, d=2), 1.0) == 0.0

    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_power_solution_exact(self, r):
        prof = RadialProfile(a=1.0, b=0.0, p=3, d=2)
        assert abs(plaplace_residual(prof, r)) <= 1e-10

    def test_log_branch_exact(self):
        prof = RadialProfile(a=1.0, b=0.0, p=2, d=2)
        assert abs(plaplace_residual(prof, 0.3)) <= 1e-10

    @given(
        a=st.floats(-3.0, 3.0).filter(lambda v: abs(v) > 1e-3),
        b=st.floats(-2.0, 2.0),
        p=st.sampled_from([2.0, 2.5, 3.0, 4.0, 6.0]),
        d=st.sampled_from([2, 3]),
        r=st.floats(0.05, 8.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_exactness_everywhere(self, a, b, p, d, r):
        prof = RadialProfile(a=a, b=b, p=p, d=d)
        scale = max(1.0, abs(a)) ** (p - 1)
        assert abs(plaplace_residual(prof, r)) <= 1e-10 * scale


class TestMeanValueSandwich:
    @given(
        r1=st.floats(0.01, 2.0),
        dr=st.floats(1e-3, 5.0),
        p=st.sampled_from([2.5, 3.0, 4.0, 6.0]),
        d=st.sampled_from([2, 3]),
    )
    @settings(max_examples=100)
    def test_endpoint_gradients_bracket_mean_slope(self, r1, dr, p, d):
        # the barrier chain compares the profile's endpoint gradients with
        # the mean slope: the outer-radius value under-shoots and the
        # inner-radius value over-shoots, for every beta <= 1
        beta = beta_exponent(p, d)
        if abs(beta) < 1e-12 or beta > 1.0:
            return
        r2 = r1 + dr
        mean = (r2**beta - r1**beta) / (r2 - r1)
        outer = beta * r2 ** (beta - 1.0)
        inner = beta * r1 ** (beta - 1.0)
        ratio_out = outer / mean
        ratio_in = inner / mean
        assert ratio_out <= 1.0 + 1e-12
        assert ratio_in >= 1.0 - 1e-12


PAIR = ParticlePair(R=1.0, delta=1e-3)


class TestBarrierFluxBound:
    def test_no_gap(self):
        fb = barrier_flux_bound(0.1, 0.5, 0.5, PAIR, p=3, d=2, C_slack=0.7)
        assert fb.leading == 0.0
        assert fb.upper == pytest.approx(0.7)
        assert fb.lower == pytest.approx(-0.7)

    def test_leading_at_axis(self):
        pair = ParticlePair(R=1.0, delta=0.01)
        fb = barrier_flux_bound(0.0, 0.0, 0.1, pair, p=3, d=2, C_slack=0.0)
        assert fb.leading == pytest.approx(10.0)

    def test_leading_off_axis(self):
        fb = barrier_flux_bound(0.05, 0.0, 0.1, PAIR, p=3, d=2, C_slack=0.2)
        assert fb.leading == pytest.approx(28.571, abs=1e-2)
        assert fb.lower <= fb.leading <= fb.upper

    def test_swap_labels_error(self):
        with pytest.raises(ValueError):
            barrier_flux_bound(0.0, 1.0, 0.0, PAIR, p=3, d=2, C_slack=0.1)

    @given(
        x=st.floats(-0.25, 0.25),
        delta=st.floats(1e-5, 0.05),
        dT=st.floats(1e-4, 1.0),
        C=st.floats(0.0, 2.0),
    )
    @settings(max_examples=100)
    def test_sandwich_order(self, x, delta, dT, C):
        pair = ParticlePair(R=1.0, delta=delta)
        fb = barrier_flux_bound(x, 0.0, dT, pair, p=3, d=2, C_slack=C)
        assert fb.lower <= fb.upper
        assert fb.lower <= fb.leading * (1.0 + 2.0 * delta)

    def test_bounds_tighten_to_leading_at_axis(self):
        # with x = 0 both barrier separations equal delta, so the ratio of
        # either bound to the leading term converges to 1 like c*delta
        dT, C = 0.3, 0.05
        for delta in (1e-3, 1e-4, 1e-5):
            pair = ParticlePair(R=1.0, delta=delta)
            fb = barrier_flux_bound(0.0, 0.0, dT, pair, p=3, d=2, C_slack=C)
            for v in (fb.lower, fb.upper):
                assert abs(v / fb.leading - 1.0) <= 2.0 * 2.0 * delta + C / fb.leading

    def test_out_of_validity_falls_back(self):
        pair = ParticlePair(R=1.0, delta=0.01)
        fb = barrier_flux_bound(0.6, 0.0, 0.1, pair, p=3, d=2, C_slack=0.1)
        assert not fb.lower_barrier_valid
        assert fb.lower <= fb.upper
