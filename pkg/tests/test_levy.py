"""Tests for Levy measure models: moments, masses, cutoffs, samplers."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chisquare

from splitsde.exceptions import ConfigurationError, DomainError, InfeasibleError
from splitsde.levy import (
    CompoundPoissonMeasure,
    EmpiricalMeasure,
    LevyTriplet,
    Localization,
    ProductMeasure,
    TemperedStableMeasure,
    UNIT_LOCALIZATION,
    eps_for_order,
    eps_power_rule,
    sample_small_localized,
    sample_tail,
    sigma_matrix,
    small_moment,
    sqrt_psd,
    tail_mass,
    zero_measure,
)


def ts(alpha=0.5, cp=1.0, cm=1.0, lp=0.0, lm=0.0, y_max=None):
    return TemperedStableMeasure(alpha, cp, cm, lp, lm, y_max=y_max)


def vg():
    # Symmetric variance-gamma driver: alpha=0, all rates 1.
    return ts(alpha=0.0, lp=1.0, lm=1.0)


def quad_oracle(model, f, a, b):
    """Independent quadrature of f(y) against the measure density over (a, b)."""
    pos = quad(lambda y: f(y) * model.density(np.array(y)), max(a, 1e-300), b, limit=200)[0]
    neg = quad(lambda y: f(-y) * model.density(np.array(-y)), max(a, 1e-300), b, limit=200)[0]
    return pos + neg


class TestSmallMoment:
    def test_compound_poisson_empty_region(self):
        model = CompoundPoissonMeasure(2.0, [1.0, -1.5], [0.5, 0.5])
        for k in (1, 2, 3):
            assert small_moment(model, k, 0.5) == 0.0

    def test_tempered_stable_closed_form(self):
        model = ts()
        for eps in (0.1, 0.5, 1.0):
            assert small_moment(model, 2, eps) == pytest.approx((4 / 3) * eps**1.5, rel=1e-12)

    def test_tempered_with_rates_near_zero_matches_asymptote(self):
        model = ts(lp=1.0, lm=1.0)
        eps = 1e-3
        assert small_moment(model, 2, eps) == pytest.approx((4 / 3) * eps**1.5, rel=1e-3)

    def test_quadrature_agrees_with_independent_oracle(self):
        model = ts(alpha=0.7, cp=1.2, cm=0.4, lp=2.0, lm=0.5)
        for k in (1, 2, 3):
            want = quad_oracle(model, lambda y: abs(y) ** k, 0.0, 0.3)
            assert small_moment(model, k, 0.3) == pytest.approx(want, rel=1e-8)

    def test_monotone_in_eps(self):
        model = ts(lp=0.3, lm=0.3)
        vals = [small_moment(model, 2, e) for e in (0.01, 0.1, 0.5, 1.0)]
        assert vals == sorted(vals)

    def test_scaling_law(self):
        # small_moment(k, eps)/eps^(k-alpha) -> (c+ + c-)/(k - alpha).
        model = ts(alpha=0.5, lp=1.0, lm=1.0)
        limit = 2.0 / 1.5
        for eps in (1e-2, 1e-3, 1e-4):
            ratio = small_moment(model, 2, eps) / eps**1.5
            assert abs(ratio / limit - 1.0) < 0.05

    def test_additivity_against_full_second_moment(self):
        model = ts(alpha=0.8, cp=1.0, cm=0.7, lp=1.3, lm=0.2)
        eps = 0.07
        inner = small_moment(model, 2, eps)
        band = quad_oracle(model, lambda y: y * y, eps, 1.0)
        full = quad_oracle(model, lambda y: y * y, 0.0, 1.0)
        assert inner + band == pytest.approx(full, rel=1e-8)


class TestSignedMoments:
    def test_one_sided_third_moment(self):
        model = ts(cp=1.0, cm=0.0)
        eps = 0.2
        # integral_0^eps y^3 y^(-1.5) dy = eps^2.5/2.5
        assert model.signed_small_moment(3, eps) == pytest.approx(eps**2.5 / 2.5, rel=1e-12)

    def test_symmetric_odd_moments_vanish(self):
        model = vg()
        assert model.signed_small_moment(3, 0.4) == pytest.approx(0.0, abs=1e-14)

    def test_band_first_moment_closed_form(self):
        model = ts(cp=1.0, cm=0.0)
        # integral_{0.25<y<=1} y * y^(-1.5) dy = 2(1 - sqrt(0.25)) = 1
        assert model.band_first_moment(0.25, 1.0) == pytest.approx(1.0, rel=1e-12)


class TestSigmaMatrix:
    def test_d1_reduces_to_second_moment(self):
        model = ts()
        eps = 0.1
        got = sigma_matrix(model, eps)
        assert got.shape == (1, 1)
        assert got[0, 0] == pytest.approx(small_moment(model, 2, eps), rel=1e-14)
        assert got[0, 0] == pytest.approx((4 / 3) * 0.1**1.5, rel=1e-12)

    def test_vanishing_region(self):
        np.testing.assert_allclose(sigma_matrix(ts(), 1e-12), 0.0, atol=1e-17)

    def test_product_measure_diagonal(self):
        prod = ProductMeasure([ts(), ts(alpha=0.2)])
        got = sigma_matrix(prod, 0.3)
        assert got.shape == (2, 2)
        assert got[0, 1] == 0.0
        assert got[0, 0] == pytest.approx(small_moment(ts(), 2, 0.3), rel=1e-12)

    def test_empirical_measure(self):
        emp = EmpiricalMeasure([[0.1, 0.0], [0.0, 2.0]], [3.0, 1.0])
        got = sigma_matrix(emp, 1.0)
        np.testing.assert_allclose(got, [[0.03, 0.0], [0.0, 0.0]], atol=1e-15)


class TestSqrtPsd:
    def test_identity(self):
        np.testing.assert_allclose(sqrt_psd(np.eye(3)) @ sqrt_psd(np.eye(3)).T, np.eye(3))

    def test_diagonal(self):
        root = sqrt_psd(np.diag([4.0, 9.0]))
        np.testing.assert_allclose(root @ root.T, np.diag([4.0, 9.0]), atol=1e-12)

    def test_random_psd_reconstruction(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(3, 3))
        mat = a @ a.T
        root = sqrt_psd(mat)
        assert np.max(np.abs(root @ root.T - mat)) < 1e-8

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(DomainError):
            sqrt_psd(np.diag([1.0, -1e-6]))

    def test_scalar_input(self):
        root = sqrt_psd(np.array([[0.25]]))
        assert root[0, 0] == pytest.approx(0.5)


class TestTailMass:
    def test_one_sided_closed_form(self):
        model = ts(cp=1.0, cm=0.0)
        for eps in (0.1, 0.4):
            assert tail_mass(model, eps) == pytest.approx(2.0 / math.sqrt(eps), rel=1e-12)

    def test_small_region_unit_localization_diverges(self):
        with pytest.raises(DomainError):
            tail_mass(ts(), 0.2, UNIT_LOCALIZATION, region="small")

    def test_finite_activity_total_mass(self):
        model = CompoundPoissonMeasure(3.0, [0.5, -2.0], [0.25, 0.75])
        assert tail_mass(model, 1e-9) == pytest.approx(3.0)

    def test_localized_small_mass(self):
        model = ts(cp=1.0, cm=0.0)
        loc = Localization(2.0)
        # integral_0^eps y^2 y^(-1.5) dy = eps^1.5/1.5
        assert tail_mass(model, 0.3, loc, region="small") == pytest.approx(
            0.3**1.5 / 1.5, rel=1e-12
        )

    def test_untempered_tail_needs_decay_or_cap(self):
        model = ts(alpha=0.5, cp=1.0, cm=0.0)
        with pytest.raises(DomainError):
            tail_mass(model, 0.1, Localization(2.0))
        capped = ts(alpha=0.5, cp=1.0, cm=0.0, y_max=5.0)
        assert tail_mass(capped, 0.1, Localization(2.0)) > 0

    def test_vg_tail_against_quadrature(self):
        model = vg()
        eps = 0.3
        want = quad_oracle(model, lambda y: 1.0, eps, np.inf)
        assert tail_mass(model, eps) == pytest.approx(want, rel=1e-8)


class TestEpsForOrder:
    def test_zero_measure_returns_cap(self):
        assert eps_for_order(zero_measure(), 0.1, 2, "ignore") == 1.0

    def test_ignore_mode_closed_form_inversion(self):
        model = ts()
        for t in (0.05, 0.1, 0.2):
            want = (3 * t**2 / 4) ** (2 / 3)
            assert eps_for_order(model, t, 1, "ignore") == pytest.approx(want, rel=1e-8)

    def test_power_rule(self):
        assert eps_power_rule(1.0, 1 / 64) == pytest.approx(1 / 8, rel=1e-14)

    def test_bisection_is_tight(self):
        model = ts(lp=0.5, lm=0.5)
        t, M = 0.07, 2
        eps = eps_for_order(model, t, M, "ar")
        rhs = t ** (M + 1)
        assert small_moment(model, 3, eps) <= rhs
        assert small_moment(model, 3, eps * (1 + 1e-6)) > rhs

    def test_validation(self):
        with pytest.raises(DomainError):
            eps_for_order(ts(), 0.0, 1, "ignore")
        with pytest.raises(DomainError):
            eps_for_order(ts(), 0.1, 0, "ignore")
        with pytest.raises(ConfigurationError):
            eps_for_order(ts(), 0.1, 1, "nope")

    def test_infeasible_measure(self):
        # A (non-Levy) stub whose small moments do not vanish with eps: no
        # cutoff can satisfy the bound and the bisection must say so.
        class Stubborn:
            def small_moment(self, k, eps):
                return 1.0

        with pytest.raises(InfeasibleError):
            eps_for_order(Stubborn(), 0.5, 1, "ignore")


class TestModelValidation:
    def test_alpha_range(self):
        with pytest.raises(ConfigurationError):
            TemperedStableMeasure(2.0, 1, 1, 1, 1)

    def test_requires_positive_side(self):
        with pytest.raises(ConfigurationError):
            TemperedStableMeasure(0.5, 0, 0, 1, 1)

    def test_alpha_ge_one_untempered_needs_cap(self):
        with pytest.raises(ConfigurationError):
            TemperedStableMeasure(1.2, 1, 1, 0, 0)
        TemperedStableMeasure(1.2, 1, 1, 0, 0, y_max=2.0)

    def test_triplet_from_pure_jump(self):
        cp = CompoundPoissonMeasure(2.0, [1.0])
        assert LevyTriplet.from_pure_jump(cp).b == pytest.approx(2.0)
        assert LevyTriplet.from_pure_jump(vg()).b == 0.0


class TestSamplers:
    def test_tail_support(self):
        rng = np.random.default_rng(0)
        draws = sample_tail(vg(), 0.3, UNIT_LOCALIZATION, rng, size=5000)
        assert np.all(np.abs(draws) > 0.3)

    def test_small_support(self):
        rng = np.random.default_rng(1)
        draws = sample_small_localized(ts(), 0.25, Localization(2.0), rng, size=5000)
        assert np.all(np.abs(draws) <= 0.25)
        assert np.all(draws != 0.0)

    def test_single_atom_tail(self):
        rng = np.random.default_rng(2)
        model = CompoundPoissonMeasure(1.0, [1.0])
        assert sample_tail(model, 0.5, UNIT_LOCALIZATION, rng) == 1.0

    def test_scalar_draw(self):
        rng = np.random.default_rng(3)
        y = sample_tail(vg(), 0.2, UNIT_LOCALIZATION, rng)
        assert isinstance(y, float) and abs(y) > 0.2

    def test_tail_mean_against_quadrature(self):
        model = ts(cp=1.0, cm=0.7, lp=1.0, lm=2.0)
        eps = 0.2
        rng = np.random.default_rng(4)
        draws = np.abs(sample_tail(model, eps, UNIT_LOCALIZATION, rng, size=100_000))
        c_eps = tail_mass(model, eps)
        want = quad_oracle(model, lambda y: abs(y), eps, np.inf) / c_eps
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - want) < 3 * se

    def test_small_localized_mean_against_quadrature(self):
        model = ts()  # alpha=0.5, untempered
        eps, loc = 0.3, Localization(2.0)
        rng = np.random.default_rng(5)
        draws = np.abs(sample_small_localized(model, eps, loc, rng, size=100_000))
        lam_eps = tail_mass(model, eps, loc, region="small")
        want = quad_oracle(model, lambda y: abs(y) ** 3, 0.0, eps) / lam_eps
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - want) < 3 * se

    def test_small_localized_r_below_alpha_rejected(self):
        with pytest.raises(DomainError):
            sample_small_localized(ts(), 0.3, Localization(0.4), np.random.default_rng(0))

    def test_positive_beta_tail_branch(self):
        # l = |y|^2 with tempering: beta = r - 1 - alpha > 0 exercises the
        # two-part exponential envelope.
        model = ts(alpha=0.5, lp=1.5, lm=1.5)
        rng = np.random.default_rng(0)
        draws = np.abs(sample_tail(model, 0.15, Localization(2.0), rng, size=100_000))
        c = tail_mass(model, 0.15, Localization(2.0))
        want = quad_oracle(model, lambda y: abs(y) ** 3, 0.15, np.inf) / c
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - want) < 3 * se

    @pytest.mark.parametrize(
        "region,loc,eps",
        [("tail", UNIT_LOCALIZATION, 0.3), ("small", Localization(2.0), 0.3)],
    )
    def test_chi_square_goodness_of_fit(self, region, loc, eps):
        model = vg()
        rng = np.random.default_rng(7)
        n = 100_000
        if region == "tail":
            draws = sample_tail(model, eps, loc, rng, size=n)
            edges = np.concatenate([-np.geomspace(8.0, eps, 12), np.geomspace(eps, 8.0, 12)])
            norm = tail_mass(model, eps, loc)
        else:
            draws = sample_small_localized(model, eps, loc, rng, size=n)
            edges = np.concatenate([-np.linspace(eps, 1e-9, 10), np.linspace(1e-9, eps, 10)])
            norm = tail_mass(model, eps, loc, region="small")
        edges = np.sort(edges)
        inside_region = (lambda y: abs(y) > eps) if region == "tail" else (lambda y: abs(y) <= eps)
        target = lambda y: float(inside_region(y)) * loc(y) * model.density(np.array(y)) / norm
        probs = np.array(
            [quad(target, lo, hi, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:])]
        )
        counts, _ = np.histogram(draws, bins=edges)
        inside = counts.sum()
        keep = probs > 5e-5
        stat = chisquare(counts[keep], inside * probs[keep] / probs[keep].sum())
        assert stat.pvalue > 1e-3

    def test_product_measure_sampler_axes(self):
        prod = ProductMeasure([vg(), vg()])
        rng = np.random.default_rng(8)
        draws = sample_tail(prod, 0.3, UNIT_LOCALIZATION, rng, size=2000)
        assert draws.shape == (2000, 2)
        # Exactly one live coordinate per draw, beyond the cutoff.
        live = np.abs(draws) > 0.3
        assert np.all(live.sum(axis=1) == 1)
