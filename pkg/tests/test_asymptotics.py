import math

import numpy as np
import pytest

from gaplaw.asymptotics import (
    LogCaseError,
    UnsupportedRegimeError,
    c_o_quadrature,
    c_o_table,
    gamma_exponent,
    is_log_case,
    neck_integral,
    predict,
    table_consistency_report,
    wallis_product,
)


class TestGammaExponent:
    def test_d2_values(self):
        assert gamma_exponent(2, 2) == pytest.approx(0.5)
        assert gamma_exponent(3, 2) == pytest.approx(1.5)
        assert gamma_exponent(4, 2) == pytest.approx(2.5)

    def test_d3_values(self):
        assert gamma_exponent(3, 3) == pytest.approx(1.0)
        assert gamma_exponent(4, 3) == pytest.approx(2.0)

    def test_log_case_marker(self):
        assert is_log_case(2, 3)
        with pytest.raises(LogCaseError):
            gamma_exponent(2, 3)

    def test_unsupported_regime(self):
        with pytest.raises(UnsupportedRegimeError):
            gamma_exponent(2.5, 3)

    @pytest.mark.parametrize("p,d", [(2, 2), (2.5, 2), (3, 2), (4, 2), (6, 2),
                                     (2.5, 3), (3, 3), (4, 3), (6, 3)])
    def test_matches_quadrature_slope(self, p, d):
        # the closed forms are only trusted because this oracle confirms
        # them: fit log J vs log delta inside the asymptotic regime
        deltas = np.geomspace(1e-8, 1e-6, 5)
        J = [neck_integral(dd, 0.9, 1.0, p, d) for dd in deltas]
        slope = np.polyfit(np.log(deltas), np.log(J), 1)[0]
        target = p - 1.5 if d == 2 else p - 2.0
        assert slope == pytest.approx(-target, abs=1e-3)
        if d <= p:
            assert gamma_exponent(p, d) == pytest.approx(target)


class TestWallisProduct:
    def test_empty_product(self):
        assert wallis_product(2) == 1.0

    def test_values(self):
        assert wallis_product(3) == pytest.approx(0.5)
        assert wallis_product(4) == pytest.approx(3.0 / 8.0)
        assert wallis_product(5) == pytest.approx(5.0 / 16.0)
        assert wallis_product(6) == pytest.approx(35.0 / 128.0)

    def test_consistency_with_d2_rows(self):
        # the general row reproduces the explicit p = 2 row
        assert c_o_table(2, 2, 1.0) == pytest.approx(math.pi * wallis_product(2))

    def test_rejects_bad_p(self):
        with pytest.raises(ValueError):
            wallis_product(1)


class TestCOTable:
    def test_printed_d2_cells(self):
        assert c_o_table(2, 2, 1.0) == pytest.approx(math.pi)
        assert c_o_table(3, 2, 1.0) == pytest.approx(math.pi / 2)
        assert c_o_table(4, 2, 4.0) == pytest.approx(3 * math.pi / 4)

    def test_printed_d3_cells(self):
        assert c_o_table(3, 3, 1.0) == pytest.approx(math.pi / 2)
        assert c_o_table(4, 3, 1.0) == pytest.approx(math.pi / 8)

    def test_log_cell_refused(self):
        with pytest.raises(LogCaseError):
            c_o_table(2, 3, 1.0)

    def test_non_integer_refused(self):
        with pytest.raises(ValueError):
            c_o_table(2.5, 2, 1.0)


class TestNeckIntegral:
    def test_exact_antiderivative_p2_d2(self):
        delta, w, R = 1e-4, 0.1, 1.0
        exact = math.sqrt(R / delta) * 2.0 * math.atan(w / math.sqrt(R * delta))
        got = neck_integral(delta, w, R, 2, 2)
        assert got == pytest.approx(exact, rel=1e-9)

    def test_exact_antiderivative_d3(self):
        # substitute s = delta + r^2/R: pi R (delta^(2-p) - (delta+w^2/R)^(2-p))/(p-2)
        delta, w, R, p = 1e-5, 0.2, 2.0, 4
        exact = math.pi * R * (delta ** (2 - p) - (delta + w * w / R) ** (2 - p)) / (p - 2)
        got = neck_integral(delta, w, R, p, 3)
        assert got == pytest.approx(exact, rel=1e-9)

    def test_scaled_limit_p3(self):
        got = 1e-6 ** 1.5 * neck_integral(1e-6, 0.1, 1.0, 3, 2)
        assert got == pytest.approx(math.pi / 2, rel=5e-3)

    def test_wide_window_wallis_limit(self):
        # x = sqrt(R delta) t turns the integral into the Wallis form; a wide
        # window at tiny delta realizes the whole-line limit
        for p in (2, 3, 4, 6):
            got = 1e-8 ** (p - 1.5) * neck_integral(1e-8, 0.9, 1.0, p, 2)
            assert got == pytest.approx(math.pi * wallis_product(p), rel=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            neck_integral(0.0, 0.1, 1.0, 2, 2)
        with pytest.raises(ValueError):
            neck_integral(1e-4, -0.1, 1.0, 2, 2)


class TestCOQuadrature:
    @pytest.mark.parametrize("p", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("R", [1.0, 4.0])
    def test_matches_table_d2(self, p, R):
        got = c_o_quadrature(p, 2, R)
        assert got == pytest.approx(c_o_table(p, 2, R), rel=1e-4)

    def test_non_integer_p(self):
        # int (1+t^2)^(-3/2) dt = 2, so the constant is 2 sqrt(R)
        assert c_o_quadrature(2.5, 2, 1.0) == pytest.approx(2.0, rel=1e-6)

    def test_window_independence(self):
        a = c_o_quadrature(3, 2, 1.0, w=0.05)
        b = c_o_quadrature(3, 2, 1.0, w=0.2)
        assert a == pytest.approx(b, rel=1e-4)

    def test_scale_law(self):
        # sqrt(R) in d = 2, R in d = 3
        assert c_o_quadrature(3, 2, 4.0) == pytest.approx(
            2.0 * c_o_quadrature(3, 2, 1.0), rel=1e-6
        )
        assert c_o_quadrature(3, 3, 4.0) == pytest.approx(
            4.0 * c_o_quadrature(3, 3, 1.0), rel=1e-6
        )

    def test_d3_oracle_value(self):
        for p in (3, 4, 6):
            assert c_o_quadrature(p, 3, 1.0) == pytest.approx(
                math.pi / (p - 2), rel=1e-4
            )

    def test_log_case_refused(self):
        with pytest.raises(LogCaseError):
            c_o_quadrature(2, 3, 1.0)


class TestPredict:
    def test_degenerate_zero_load(self):
        pred = predict(3, 2, 1.0, 0.0, 1e-3, C_o=math.pi / 2)
        assert pred.gap == 0.0
        assert pred.grad_max == 0.0
        assert pred.degenerate

    def test_negative_load_rejected(self):
        with pytest.raises(ValueError):
            predict(3, 2, 1.0, -1.0, 1e-3, C_o=1.0)

    def test_p2_blowup_exponent(self):
        pred = predict(2, 2, 1.0, 1.0, 1e-4, C_o=math.pi)
        assert pred.grad_exponent == pytest.approx(-0.5)
        # halving delta grows the gradient like delta^(-1/2)
        pred2 = predict(2, 2, 1.0, 1.0, 0.25e-4, C_o=math.pi)
        assert pred2.grad_max / pred.grad_max == pytest.approx(2.0)

    def test_worked_example_p3(self):
        pred = predict(3, 2, 1.0, math.pi / 2, 1e-4, C_o=math.pi / 2)
        assert pred.gap == pytest.approx(1e-3)

    def test_gap_gradient_identity(self):
        # the two laws are one algebraic statement: grad_max * delta == gap
        for p, d in [(2, 2), (3, 2), (4, 3)]:
            pred = predict(p, d, 1.0, 2.0, 3.7e-3, C_o=1.3)
            assert pred.grad_max * pred.delta == pred.gap

    def test_log_case_scalings(self):
        pred = predict(2, 3, 1.0, 1.0, 1e-3, C_o=math.pi)
        L = math.log(1e3)
        assert pred.log_case
        assert pred.gap == pytest.approx((1.0 / (math.pi * L)))
        assert pred.grad_max == pytest.approx((1.0 / math.pi) * L / 1e-3)


class TestTableConsistencyReport:
    def test_d2_consistent(self):
        rep = table_consistency_report(4, 2, 1.0)
        assert not rep.mismatch
        assert rep.ratio == pytest.approx(1.0, abs=1e-4)

    def test_d3_flags_mismatch(self):
        rep = table_consistency_report(3, 3, 2.0)
        assert rep.mismatch
        assert rep.quadrature_value == pytest.approx(2.0 * math.pi, rel=1e-4)
        assert rep.table_value == pytest.approx(math.pi, rel=1e-12)
        assert rep.ratio == pytest.approx(2.0, rel=1e-4)
        assert "2^(p-2)" in rep.note

    def test_log_pair_reported_not_asserted(self):
        rep = table_consistency_report(2, 3, 1.0)
        assert rep.mismatch
        assert rep.log_coefficient == pytest.approx(math.pi)
        assert rep.table_log_value == pytest.approx(0.0)

    def test_non_integer_quadrature_only(self):
        rep = table_consistency_report(2.5, 2, 1.0)
        assert rep.table_value is None
        assert not rep.mismatch
