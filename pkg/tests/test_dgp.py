"""Moving-average generator and its closed-form response path."""

import math

import numpy as np
import pytest

from qblp import (
    DataError,
    DgpMode,
    MomentCovKind,
    SpecKind,
    VmaParams,
    build_design,
    build_vma,
    ols,
    simulate,
    true_irf,
    tsls,
)


class TestTrueIrf:
    def test_hand_computed_values(self):
        L = 7
        weights = [(l + 1) * math.exp(0.5 * (1 - l)) for l in range(L + 1)]
        denom = sum(weights[1:])
        assert denom == pytest.approx(8.1917, abs=2e-4)
        path = true_irf(L)
        assert path[0] == pytest.approx(weights[0] / denom, rel=1e-12)
        assert path[0] == pytest.approx(0.2013, abs=2e-4)
        for l in range(L + 1):
            assert path[l] == pytest.approx(weights[l] / denom, rel=1e-12)

    def test_hump_shape(self):
        path = true_irf(7)
        # rises from impact to l = 1, then decays monotonically
        assert path[1] / path[0] == pytest.approx(2.0 * math.exp(-0.5), rel=1e-12)
        assert path[1] > path[0]
        assert np.all(np.diff(path[1:]) < 0.0)

    def test_full_denominator_sums_to_one(self):
        assert true_irf(5, denominator="full").sum() == pytest.approx(1.0, rel=1e-12)
        assert true_irf(5).sum() > 1.0

    def test_validation(self):
        with pytest.raises(DataError):
            true_irf(0)
        with pytest.raises(DataError):
            true_irf(3, denominator="other")


class TestBuildVma:
    def test_response_path_is_pinned(self):
        params = build_vma(L=7, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=0)
        np.testing.assert_allclose(params.Gammas[:, 1, 0], true_irf(7))

    def test_free_cells_decay_linearly(self):
        L = 7
        params = build_vma(L=L, M=3, mode=DgpMode.SHOCK_OBSERVED, seed=1)
        cell = params.Gammas[:, 1, 1]
        # common draw scaled by (L+2-l)/(L+1)/2
        ratios = cell / cell[0]
        expect = (L + 2.0 - np.arange(L + 1)) / (L + 2.0)
        np.testing.assert_allclose(ratios, expect, rtol=1e-12)
        assert 0.0 < cell[0] < 0.5 * (L + 2.0) / (L + 1.0) * 0.5

    def test_pinned_shared_cell(self):
        L, g = 5, 0.3
        params = build_vma(L=L, M=3, mode=DgpMode.SHOCK_OBSERVED, gamma_star=g)
        decay = 0.5 * (L + 2.0 - np.arange(L + 1)) / (L + 1.0)
        np.testing.assert_allclose(params.Gammas[:, 1, 1], g * decay, rtol=1e-12)
        np.testing.assert_allclose(params.Gammas[:, 2, 0], g * decay, rtol=1e-12)
        np.testing.assert_allclose(params.Gammas[:, 2, 2], g * decay, rtol=1e-12)
        # nothing random remains, so repeated builds agree exactly
        again = build_vma(L=L, M=3, mode=DgpMode.SHOCK_OBSERVED, gamma_star=g)
        np.testing.assert_array_equal(params.Gammas, again.Gammas)

    def test_response_scale_scales_only_the_response_row(self):
        base = build_vma(L=4, M=3, mode=DgpMode.SHOCK_OBSERVED, gamma_star=0.25)
        half = build_vma(
            L=4,
            M=3,
            mode=DgpMode.SHOCK_OBSERVED,
            gamma_star=0.25,
            response_scale=0.5,
        )
        np.testing.assert_allclose(
            half.Gammas[:, 1, :], 0.5 * base.Gammas[:, 1, :], rtol=1e-12
        )
        np.testing.assert_array_equal(half.Gammas[:, 0, :], base.Gammas[:, 0, :])
        np.testing.assert_array_equal(half.Gammas[:, 2, :], base.Gammas[:, 2, :])
        np.testing.assert_allclose(half.irf, 0.5 * true_irf(4), rtol=1e-12)

    def test_observed_shock_constraints(self):
        params = build_vma(L=5, M=3, mode=DgpMode.SHOCK_OBSERVED, seed=2)
        np.testing.assert_array_equal(params.Gammas[0, 0], [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(params.Gammas[1:, 0, :], 0.0)
        assert params.R == 0

    def test_iv_constraints(self):
        params = build_vma(L=5, M=2, mode=DgpMode.IV, seed=3, R=2, rho=0.3)
        assert params.Gammas[0, 0, 0] == 1.0
        # the shock equation keeps its own moving-average structure
        assert np.any(params.Gammas[1:, 0, :] != 0.0)
        assert params.R == 2

    def test_validation(self):
        with pytest.raises(DataError):
            build_vma(L=0, M=2, mode=DgpMode.SHOCK_OBSERVED)
        with pytest.raises(DataError):
            build_vma(L=3, M=1, mode=DgpMode.SHOCK_OBSERVED)
        with pytest.raises(DataError):
            build_vma(L=3, M=2, mode=DgpMode.IV, R=0)
        with pytest.raises(DataError):
            build_vma(L=3, M=2, mode=DgpMode.IV, rho=1.0)
        with pytest.raises(DataError):
            build_vma(L=3, M=2, mode=DgpMode.IV, beta=-0.5)
        with pytest.raises(DataError):
            build_vma(L=3, M=2, mode=DgpMode.SHOCK_OBSERVED, gamma_star=0.0)
        with pytest.raises(DataError):
            build_vma(L=3, M=2, mode=DgpMode.SHOCK_OBSERVED, gamma_star=1.0)
        with pytest.raises(DataError):
            build_vma(L=3, M=2, mode=DgpMode.SHOCK_OBSERVED, response_scale=0.0)

    def test_params_validation(self):
        good = build_vma(L=3, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=4)
        with pytest.raises(DataError):
            VmaParams(
                L=3, M=2, Gammas=good.Gammas[:3], mode=good.mode, irf=good.irf
            )
        bad_irf = good.irf.copy()
        bad_irf[1] += 0.1
        with pytest.raises(DataError):
            VmaParams(
                L=3, M=2, Gammas=good.Gammas, mode=good.mode, irf=bad_irf
            )


class TestSimulate:
    def test_row_count_and_names(self):
        params = build_vma(L=4, M=3, mode=DgpMode.SHOCK_OBSERVED, seed=5)
        sim = simulate(params, T=50, H=6, seed=5)
        assert sim.data.values.shape == (56, 3)
        assert sim.data.names == ("w1", "w2", "w3")

    def test_observed_mode_first_column_is_the_shock(self):
        params = build_vma(L=4, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=6)
        sim = simulate(params, T=200, H=4, seed=6)
        np.testing.assert_array_equal(sim.data.values[:, 0], sim.eps1)

    def test_matches_hand_convolution(self):
        params = build_vma(L=3, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=7)
        T, H = 12, 2
        sim = simulate(params, T=T, H=H, seed=9)
        rng = np.random.default_rng(9)
        eps = rng.standard_normal((3 + T + H, 2))
        for t in range(T + H):
            row = sum(params.Gammas[l] @ eps[3 + t - l] for l in range(4))
            np.testing.assert_allclose(sim.data.values[t], row, atol=1e-12)

    def test_iv_columns_and_exact_noise_free_case(self):
        params = build_vma(L=3, M=2, mode=DgpMode.IV, seed=8, R=2, beta=0.0)
        sim = simulate(params, T=100, H=3, seed=8)
        assert sim.data.names == ("w1", "w2", "z1", "z2")
        np.testing.assert_allclose(sim.data.values[:, 2], sim.eps1 / 2.0, atol=1e-12)
        np.testing.assert_allclose(sim.data.values[:, 3], sim.eps1 / 2.0, atol=1e-12)

    def test_instrument_correlation_baseline(self):
        # z = eps1 + noise gives corr(z, eps1) = 1/sqrt(2)
        params = build_vma(L=7, M=2, mode=DgpMode.IV, seed=10, R=1, rho=0.0, beta=1.0)
        sim = simulate(params, T=200_000, H=0, seed=10)
        z = sim.data.values[:, 2]
        corr = np.corrcoef(z, sim.eps1)[0, 1]
        assert corr == pytest.approx(1.0 / math.sqrt(2.0), abs=0.01)
        assert z.var() == pytest.approx(2.0, rel=0.02)

    def test_instrument_serial_correlation(self):
        rho = 0.6
        params = build_vma(L=7, M=2, mode=DgpMode.IV, seed=11, R=1, rho=rho, beta=1.0)
        sim = simulate(params, T=100_000, H=0, seed=11)
        z = sim.data.values[:, 2]
        auto = np.corrcoef(z[1:], z[:-1])[0, 1]
        assert auto == pytest.approx(rho, abs=0.02)

    def test_second_variable_variance_oracle(self):
        params = build_vma(L=7, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=12)
        sim = simulate(params, T=200_000, H=0, seed=12)
        w2 = sim.data.values[:, 1]
        expect = float(np.sum(params.Gammas[:, 1, :] ** 2))
        assert w2.var() == pytest.approx(expect, rel=0.02)
        # impact response: E[w2_t eps1_t] = impact coefficient
        assert np.mean(w2 * sim.eps1) == pytest.approx(params.irf[0], abs=0.01)

    def test_deterministic_given_seed(self):
        params = build_vma(L=4, M=2, mode=DgpMode.IV, seed=13, R=1)
        a = simulate(params, T=50, H=3, seed=14)
        b = simulate(params, T=50, H=3, seed=14)
        np.testing.assert_array_equal(a.data.values, b.data.values)

    def test_validation(self):
        params = build_vma(L=3, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=15)
        with pytest.raises(DataError):
            simulate(params, T=0, H=3)
        with pytest.raises(DataError):
            simulate(params, T=10, H=-1)


class TestPopulationRecovery:
    def test_ols_recovers_the_response_path(self):
        L = H = 7
        params = build_vma(L=L, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=16)
        sim = simulate(params, T=50_000, H=H, seed=16)
        design = build_design(
            sim.data, response="w2", shock="w1", H=H, L=L, spec=SpecKind.LEVEL
        )
        irf_hat = ols(design).irf()
        np.testing.assert_allclose(irf_hat, true_irf(L), atol=0.02)

    def test_tsls_recovers_the_response_path(self):
        L = H = 7
        params = build_vma(
            L=L, M=2, mode=DgpMode.IV, seed=17, R=1, rho=0.0, beta=1.0
        )
        sim = simulate(params, T=50_000, H=H, seed=17)
        design = build_design(
            sim.data,
            response="w2",
            shock="w1",
            iv=("z1",),
            H=H,
            L=L,
            spec=SpecKind.LEVEL,
        )
        irf_hat = tsls(design).irf()
        np.testing.assert_allclose(irf_hat, true_irf(L), atol=0.03)

    def test_long_differenced_design_recovers_the_path_too(self):
        L = H = 7
        params = build_vma(L=L, M=2, mode=DgpMode.SHOCK_OBSERVED, seed=18)
        sim = simulate(params, T=50_000, H=H, seed=18)
        design = build_design(
            sim.data,
            response="w2",
            shock="w1",
            H=H,
            L=L,
            spec=SpecKind.LONG_DIFFERENCED,
        )
        irf_hat = ols(design).irf()
        np.testing.assert_allclose(irf_hat, true_irf(L), atol=0.03)
