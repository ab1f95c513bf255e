"""Pointwise intervals and simultaneous bands."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from qblp import (
    BandMethod,
    BandResult,
    DataError,
    NumericalError,
    PointwiseMode,
    extract_irf_covariance,
    hazen_quantile,
    pointwise_interval,
    supt_plugin,
    supt_quantile,
)


def random_spd(D, rng, base=0.5):
    A = rng.standard_normal((D, D))
    return A @ A.T + base * D * np.eye(D)


class TestHazenQuantile:
    def test_median_of_one_to_ten(self):
        assert hazen_quantile(np.arange(1.0, 11.0), 0.5) == 5.5

    def test_plotting_positions(self):
        a = np.arange(1.0, 11.0)
        # g = q*n - 1/2: q=0.25 lands exactly on the third order statistic
        assert hazen_quantile(a, 0.25) == 3.0
        assert hazen_quantile(a, 0.05) == 1.0  # clamped at the smallest
        assert hazen_quantile(a, 0.999) == 10.0  # clamped at the largest

    def test_matches_numpy_hazen_method(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(501)
        for q in (0.013, 0.05, 0.25, 0.5, 0.77, 0.95, 0.99):
            assert hazen_quantile(x, q) == pytest.approx(
                float(np.quantile(x, q, method="hazen")), rel=1e-12
            )

    def test_sorted_flag_skips_sorting(self):
        x = np.sort(np.random.default_rng(1).standard_normal(200))
        assert hazen_quantile(x, 0.3, is_sorted=True) == hazen_quantile(x, 0.3)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            hazen_quantile(np.array([]), 0.5)


class TestExtractIrfCovariance:
    def test_picks_strided_submatrix(self):
        J, H = 3, 2
        D = J * (H + 1)
        Omega = (100.0 * np.arange(D)[:, None] + np.arange(D)).astype(float)
        sub = extract_irf_covariance(Omega, shock_index=1, J=J, H=H)
        idx = [1, 4, 7]
        for a, ia in enumerate(idx):
            for b, ib in enumerate(idx):
                assert sub[a, b] == 100.0 * ia + ib

    def test_shape_and_index_validation(self):
        with pytest.raises(DataError):
            extract_irf_covariance(np.eye(5), 0, J=2, H=2)
        with pytest.raises(DataError):
            extract_irf_covariance(np.eye(6), 2, J=2, H=2)


class TestPointwiseInterval:
    def test_raw_mode_is_columnwise_hazen(self):
        rng = np.random.default_rng(2)
        draws = rng.standard_normal((2000, 4))
        lower, upper = pointwise_interval(
            alpha=0.10, mode=PointwiseMode.RAW_QUANTILES, draws1=draws
        )
        for h in range(4):
            assert lower[h] == hazen_quantile(draws[:, h], 0.05)
            assert upper[h] == hazen_quantile(draws[:, h], 0.95)

    def test_asymptotic_mode_is_normal_interval(self):
        theta = np.array([1.0, -2.0, 0.5])
        Omega = np.diag([4.0, 9.0, 1.0])
        lower, upper = pointwise_interval(
            alpha=0.10,
            mode=PointwiseMode.ASYMPTOTIC,
            theta1_hat=theta,
            Omega1=Omega,
            T_eff=100,
        )
        z = norm.ppf(0.95)
        np.testing.assert_allclose(lower, theta - z * np.sqrt([0.04, 0.09, 0.01]))
        np.testing.assert_allclose(upper, theta + z * np.sqrt([0.04, 0.09, 0.01]))

    def test_too_few_draws_for_tail(self):
        draws = np.random.default_rng(3).standard_normal((100, 2))
        with pytest.raises(DataError):
            pointwise_interval(
                alpha=0.10, mode=PointwiseMode.RAW_QUANTILES, draws1=draws
            )

    def test_missing_inputs(self):
        with pytest.raises(DataError):
            pointwise_interval(alpha=0.10, mode=PointwiseMode.RAW_QUANTILES)
        with pytest.raises(DataError):
            pointwise_interval(alpha=0.10, mode=PointwiseMode.ASYMPTOTIC)
        with pytest.raises(DataError):
            pointwise_interval(
                alpha=1.5,
                mode=PointwiseMode.RAW_QUANTILES,
                draws1=np.zeros((5000, 2)),
            )


class TestSuptPlugin:
    def test_single_coordinate_reduces_to_normal_quantile(self):
        out = supt_plugin(np.array([[2.0]]), np.array([0.3]), T_eff=50, seed=0)
        z = norm.ppf(0.95)
        assert out.critical_value >= z
        assert out.critical_value == pytest.approx(z, abs=0.02)

    def test_near_perfect_dependence_collapses_to_pointwise(self):
        ones = np.ones((6, 6))
        Omega = 2.0 * ones + 1e-8 * np.eye(6)
        out = supt_plugin(Omega, np.zeros(6), T_eff=100, seed=1)
        assert out.critical_value == pytest.approx(norm.ppf(0.95), abs=0.02)

    def test_independent_case_closed_form(self):
        # max of K independent |N(0,1)|: the 1-alpha critical value solves
        # (2 Phi(c) - 1)^K = 1 - alpha
        K = 8
        closed = norm.ppf(0.5 * (1.0 + 0.9 ** (1.0 / K)))
        assert closed == pytest.approx(2.4814823593, abs=1e-9)
        out = supt_plugin(np.eye(K), np.zeros(K), T_eff=100, seed=2)
        assert out.critical_value == pytest.approx(closed, abs=0.012)

    def test_band_geometry(self):
        rng = np.random.default_rng(4)
        Omega = random_spd(5, rng)
        theta = rng.standard_normal(5)
        out = supt_plugin(Omega, theta, T_eff=200, seed=3)
        z = norm.ppf(0.95)
        c = out.critical_value
        scale = np.sqrt(np.diag(Omega) / 200)
        np.testing.assert_allclose(out.sim_lower, theta - c * scale)
        np.testing.assert_allclose(out.sim_upper, theta + c * scale)
        np.testing.assert_allclose(out.pw_lower, theta - z * scale)
        assert c >= z
        assert math.isnan(out.xi)
        assert out.method is BandMethod.PLUGIN_SUPT

    def test_deterministic_given_seed(self):
        Omega = random_spd(4, np.random.default_rng(5))
        a = supt_plugin(Omega, np.zeros(4), T_eff=100, seed=9)
        b = supt_plugin(Omega, np.zeros(4), T_eff=100, seed=9)
        c = supt_plugin(
            Omega, np.zeros(4), T_eff=100, rng=np.random.default_rng(9)
        )
        assert a.critical_value == b.critical_value == c.critical_value

    def test_validation(self):
        with pytest.raises(NumericalError):
            supt_plugin(np.ones((3, 3)), np.zeros(3), T_eff=100)
        with pytest.raises(DataError):
            supt_plugin(np.eye(3), np.zeros(3), T_eff=100, n_sim=10)
        with pytest.raises(DataError):
            supt_plugin(np.eye(3), np.zeros(3), T_eff=100, alpha=0.0)


class TestSuptQuantile:
    def test_identical_columns_keep_pointwise_tails(self):
        rng = np.random.default_rng(6)
        z = rng.standard_normal(20000)
        draws = np.tile(z[:, None], (1, 5))
        out = supt_quantile(draws, alpha=0.10)
        assert out.attained
        assert out.xi > 0.042
        assert math.isnan(out.critical_value)
        assert out.method is BandMethod.QUANTILE_SUPT

    def test_returned_band_attains_joint_coverage(self):
        rng = np.random.default_rng(7)
        L = np.linalg.cholesky(random_spd(6, rng))
        draws = rng.standard_normal((20000, 6)) @ L.T
        out = supt_quantile(draws, alpha=0.10)
        inside = np.all((draws >= out.sim_lower) & (draws <= out.sim_upper), axis=1)
        assert inside.mean() >= 0.90
        assert 1.0 / 20000 <= out.xi <= 0.05

    def test_unattainable_coverage_is_flagged(self):
        # many independent columns at a harsh level: even the widest
        # admissible box misses more than alpha of its own draws
        rng = np.random.default_rng(8)
        draws = rng.standard_normal((1000, 40))
        out = supt_quantile(draws, alpha=0.01)
        assert not out.attained
        assert out.xi == pytest.approx(1.0 / 1000)

    def test_agrees_with_plugin_on_shared_gaussian_draws(self):
        rng = np.random.default_rng(10)
        Omega = random_spd(8, rng)
        theta = rng.standard_normal(8)
        T_eff = 400
        n_sim = 100_000
        seed = 11
        out_plugin = supt_plugin(Omega, theta, T_eff, n_sim=n_sim, seed=seed)
        L = np.linalg.cholesky(0.5 * (Omega + Omega.T))
        E = np.random.default_rng(seed).standard_normal((n_sim, 8)) @ L.T
        draws = theta + E / math.sqrt(T_eff)
        out_q = supt_quantile(draws, alpha=0.10)
        np.testing.assert_allclose(
            out_q.half_widths(), out_plugin.half_widths(), rtol=0.02
        )

    def test_validation(self):
        with pytest.raises(DataError):
            supt_quantile(np.zeros((500, 3)))
        with pytest.raises(DataError):
            supt_quantile(np.zeros(5000))
        with pytest.raises(DataError):
            supt_quantile(np.zeros((5000, 3)), alpha=1.0)


class TestBandResult:
    def _ok(self, **overrides):
        fields = dict(
            point=np.zeros(3),
            pw_lower=-np.ones(3),
            pw_upper=np.ones(3),
            sim_lower=-2 * np.ones(3),
            sim_upper=2 * np.ones(3),
            critical_value=2.0,
            xi=float("nan"),
            alpha=0.1,
            method=BandMethod.PLUGIN_SUPT,
        )
        fields.update(overrides)
        return BandResult(**fields)

    def test_covers(self):
        band = self._ok()
        assert band.covers(np.array([1.5, -1.9, 0.0]))
        assert not band.covers(np.array([0.0, 2.5, 0.0]))

    def test_half_widths(self):
        np.testing.assert_allclose(self._ok().half_widths(), 2.0)

    def test_pointwise_must_bracket_point(self):
        with pytest.raises(NumericalError):
            self._ok(pw_lower=np.array([0.5, -1.0, -1.0]))

    def test_simultaneous_must_contain_pointwise(self):
        with pytest.raises(NumericalError):
            self._ok(sim_upper=np.array([0.5, 2.0, 2.0]))

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            self._ok(sim_upper=np.ones(4))
