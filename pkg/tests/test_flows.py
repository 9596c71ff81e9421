"""Tests for flow maps, tableaus, noise sources and the drift correction."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from splitsde.exceptions import ConfigurationError, DomainError
from splitsde.flows import (
    TABLEAUS,
    ButcherTableau,
    VectorFieldSpec,
    constant_field,
    exp_map,
    gaussian_moment,
    linear_field,
    matrix_field,
    rk_flow,
    sample_noise,
    stratonovich_drift,
    taylor_flow,
    three_point_moment,
)


def sine_field(max_order=4):
    """V(x) = sin(x) + 2 with hand-derived iterated derivatives."""

    def g(k, x):
        x = np.asarray(x, dtype=float)
        s, c = np.sin(x), np.cos(x)
        v = s + 2
        if k == 0:
            return x
        if k == 1:
            return v
        if k == 2:
            return v * c
        u = np.cos(2 * x) - 2 * s
        if k == 3:
            return v * u
        du = -2 * np.sin(2 * x) - 2 * c
        if k == 4:
            return v * (c * u + v * du)
        raise ValueError(k)

    return VectorFieldSpec(
        dim=1,
        func=lambda x: np.sin(np.asarray(x, dtype=float)) + 2,
        iterated=g,
        iterated_order=max_order,
        jacobian=lambda x: np.cos(np.asarray(x, dtype=float)),
        name="sine+2",
    )


class TestExpMap:
    def test_zero_field(self):
        V = constant_field(0.0)
        for t in (-1.0, 0.0, 0.7):
            assert exp_map(V, t, 2.5) == pytest.approx(2.5)

    def test_linear_reference_solve(self):
        # Drop the closed form so the adaptive reference path is exercised.
        V = VectorFieldSpec(dim=1, func=lambda x: np.asarray(x, dtype=float), name="id")
        assert exp_map(V, 0.3, 2.0) == pytest.approx(2.0 * math.exp(0.3), rel=1e-10)

    def test_negative_time(self):
        V = VectorFieldSpec(dim=1, func=lambda x: np.asarray(x, dtype=float))
        assert exp_map(V, -0.4, 1.5) == pytest.approx(1.5 * math.exp(-0.4), rel=1e-10)

    def test_matrix_exponential_oracle(self):
        A = np.array([[0.1, -0.5], [0.3, -0.2]])
        x = np.array([1.0, -2.0])
        V = VectorFieldSpec(dim=2, func=lambda y: y @ A.T, name="lin2")
        got = exp_map(V, 0.8, x)
        want = expm(0.8 * A) @ x
        np.testing.assert_allclose(got, want, rtol=1e-9)

    def test_closed_form_used_when_present(self):
        got = exp_map(matrix_field(np.array([[0.0, 1.0], [-1.0, 0.0]])), 0.5, np.array([1.0, 0.0]))
        np.testing.assert_allclose(got, [math.cos(0.5), -math.sin(0.5)], rtol=1e-12)

    def test_flow_composition(self):
        V = sine_field()
        rng = np.random.default_rng(5)
        for _ in range(100):
            s, t = rng.uniform(-0.5, 0.5, size=2)
            x = rng.uniform(-2, 2)
            once = exp_map(V, s + t, x)
            twice = exp_map(V, s, exp_map(V, t, x))
            assert twice == pytest.approx(once, abs=1e-9)

    def test_growth_bound_form(self):
        # exp(tV)x stays within C*exp(K|t|)(1+|x|) for V with linear growth.
        V = sine_field()
        rng = np.random.default_rng(6)
        for _ in range(50):
            t = rng.uniform(-1, 1)
            x = rng.uniform(-5, 5)
            assert abs(exp_map(V, t, x)) <= 3.0 * math.exp(2.0 * abs(t)) * (1 + abs(x))


class TestTaylorFlow:
    def test_first_order(self):
        V = sine_field()
        x = 0.4
        assert taylor_flow(V, 1, 0.05, x) == pytest.approx(x + 0.05 * (math.sin(x) + 2))

    def test_linear_field_value(self):
        got = taylor_flow(linear_field(1.0), 3, 0.1, 1.0)
        assert got == pytest.approx(1 + 0.1 + 0.005 + 0.1**3 / 6, abs=1e-15)

    def test_zero_step(self):
        assert taylor_flow(sine_field(), 3, 0.0, 1.3) == pytest.approx(1.3)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_convergence_order(self, m):
        # t small enough that the leading remainder term dominates.
        V = sine_field()
        x = 0.3
        ts = [2.0**-k for k in range(6, 10)]
        errs = [abs(exp_map(V, t, x) - taylor_flow(V, m, t, x)) for t in ts]
        slope = np.polyfit(np.log(ts), np.log(errs), 1)[0]
        assert slope >= m + 1 - 0.1

    def test_missing_derivatives_without_fallback(self):
        V = VectorFieldSpec(dim=1, func=lambda x: np.sin(x), name="bare")
        with pytest.raises(ConfigurationError):
            taylor_flow(V, 3, 0.1, 1.0)

    def test_fd_fallback_when_flagged(self):
        V = VectorFieldSpec(dim=1, func=lambda x: np.sin(np.asarray(x)) + 2, allow_fd=True)
        got = taylor_flow(V, 2, 0.01, 0.3)
        want = taylor_flow(sine_field(), 2, 0.01, 0.3)
        assert got == pytest.approx(want, abs=1e-8)

    def test_batched_states_and_times(self):
        V = linear_field(0.5)
        x = np.array([1.0, 2.0, 3.0])
        t = np.array([0.1, 0.2, 0.3])
        got = taylor_flow(V, 2, t, x)
        want = x * (1 + 0.5 * t + (0.5 * t) ** 2 / 2)
        np.testing.assert_allclose(got, want, rtol=1e-14)


class TestRkFlow:
    def test_euler(self):
        V = sine_field()
        assert rk_flow(TABLEAUS[1], V, 0.1, 0.4) == pytest.approx(0.4 + 0.1 * (math.sin(0.4) + 2))

    def test_classical4_linear_value(self):
        got = rk_flow(TABLEAUS[4], linear_field(1.0), 0.1, 1.0)
        want = sum(0.1**k / math.factorial(k) for k in range(5))
        assert got == pytest.approx(want, abs=1e-15)

    def test_zero_step(self):
        assert rk_flow(TABLEAUS[3], sine_field(), 0.0, 2.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_linear_stability_polynomial_exact(self, order):
        # On V(x) = x the flow is x times the degree-s polynomial matching
        # exp through the tableau order; for these tableaus it IS the
        # truncated exponential.
        V = linear_field(1.0)
        for z in (0.3, -0.7, 1.1):
            got = rk_flow(TABLEAUS[order], V, z, 1.0)
            want = sum(z**k / math.factorial(k) for k in range(order + 1))
            assert got == pytest.approx(want, rel=1e-14)

    def test_fehlberg5_matches_exp_through_order5(self):
        V = linear_field(1.0)
        for z in (0.2, -0.2, 0.1):
            got = rk_flow(TABLEAUS[5], V, z, 1.0)
            want = sum(z**k / math.factorial(k) for k in range(6))
            assert abs(got - want) < 2 * abs(z) ** 6

    @pytest.mark.parametrize("order,krange", [(2, (4, 8)), (3, (3, 7)), (4, (3, 7)), (5, (3, 7))])
    def test_convergence_order(self, order, krange):
        V = sine_field()
        x = 0.3
        ts = [2.0**-k for k in range(*krange)]
        errs = [abs(exp_map(V, t, x) - rk_flow(TABLEAUS[order], V, t, x)) for t in ts]
        slope = np.polyfit(np.log(ts), np.log(errs), 1)[0]
        assert slope >= order + 1 - 0.1

    def test_tableau_validation(self):
        with pytest.raises(ConfigurationError):
            ButcherTableau("bad", ((),), (0.9,), 1)
        with pytest.raises(ConfigurationError):
            ButcherTableau("bad", ((0.5,),), (1.0,), 1)


class TestNoise:
    def test_gaussian_variance(self):
        rng = np.random.default_rng(0)
        draws = sample_noise("gaussian", 0.25, rng, size=200_000)
        assert np.mean(draws) == pytest.approx(0.0, abs=0.005)
        assert np.var(draws) == pytest.approx(0.25, rel=0.02)

    def test_three_point_support_and_probabilities(self):
        rng = np.random.default_rng(1)
        draws = sample_noise("three_point", 1.0, rng, size=300_000)
        atoms = {-math.sqrt(3), 0.0, math.sqrt(3)}
        assert set(np.unique(draws)) <= atoms
        p_zero = np.mean(draws == 0.0)
        assert p_zero == pytest.approx(2 / 3, abs=0.01)

    def test_zero_duration(self):
        rng = np.random.default_rng(2)
        assert sample_noise("gaussian", 0.0, rng) == 0.0
        assert sample_noise("three_point", 0.0, rng) == 0.0

    def test_negative_duration_rejected(self):
        with pytest.raises(DomainError):
            sample_noise("gaussian", -0.1, np.random.default_rng(0))

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            sample_noise("cauchy", 1.0, np.random.default_rng(0))

    def test_moments_match_gaussian_through_order_five(self):
        for k in range(6):
            assert three_point_moment(k) == gaussian_moment(k)
        assert three_point_moment(6) == Fraction(9)
        assert gaussian_moment(6) == Fraction(15)

    def test_three_point_moment_values(self):
        assert three_point_moment(2) == Fraction(1)
        assert three_point_moment(4) == Fraction(3)
        assert three_point_moment(3) == Fraction(0)

    def test_weak_substitution_identity(self):
        # E[(x + sqrt(t) Z)^k] equals the Gaussian value exactly for k <= 5,
        # by enumeration against the Gaussian moment formula.
        x, t = Fraction(3, 2), Fraction(1, 4)
        for k in range(6):
            three = sum(
                math.comb(k, j) * x ** (k - j) * t ** Fraction(j, 2) * three_point_moment(j)
                for j in range(0, k + 1, 2)
            )
            gauss = sum(
                math.comb(k, j) * x ** (k - j) * t ** Fraction(j, 2) * gaussian_moment(j)
                for j in range(0, k + 1, 2)
            )
            assert three == gauss


class TestStratonovichDrift:
    def test_constant_brownian_fields_leave_drift(self):
        drift = linear_field(0.7)
        v0 = stratonovich_drift(drift, [constant_field(2.0), constant_field(-1.0)])
        for x in (0.0, 1.3, -2.0):
            assert v0.func(x) == pytest.approx(0.7 * x)

    def test_gbm_correction(self):
        mu, sigma = 0.05, 0.2
        v0 = stratonovich_drift(linear_field(mu), [linear_field(sigma)])
        for x in (1.0, 2.5):
            assert v0.func(x) == pytest.approx((mu - sigma**2 / 2) * x)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            stratonovich_drift(
                linear_field(0.1), [matrix_field(np.eye(2))]
            )

    def test_fd_jacobian_fallback(self):
        drift = linear_field(0.0)
        V = VectorFieldSpec(
            dim=1, func=lambda x: 0.2 * np.asarray(x, dtype=float), allow_fd=True
        )
        v0 = stratonovich_drift(drift, [V])
        assert v0.func(2.0) == pytest.approx(-0.5 * 0.04 * 2.0, rel=1e-6)
