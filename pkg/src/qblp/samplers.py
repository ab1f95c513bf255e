"""Posterior simulators and chain diagnostics.

Three samplers share the ThetaDraws output contract: an elliptical slice
sampler whose auxiliary Gaussian is the anchor's asymptotic distribution
(with a random-walk fallback when shrinkage stalls), a Gibbs sampler that
treats that asymptotic normal as the likelihood, and a Gibbs sampler for the
multivariate-normal working model.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .data_model import LpDesign
from .errors import DataError, NumericalError
from .estimators import ThetaMatrix, ols
from .posteriors import (
    FlatPrior,
    PriorSpec,
    RoughnessPenalty,
    ags_model_covariance,
    log_quasi_posterior,
)


@dataclass(frozen=True)
class ChainConfig:
    """Chain length, seed, and slice/fallback tuning.

    shrink_limit caps the number of ellipse proposals per step before the
    random-walk fallback fires; 0 disables the slice move entirely.
    mh_scale defaults to (2.38 / sqrt(D))^2 at run time when left None.
    """

    n_iter: int = 50_000
    burn_in: int = 10_000
    seed: int = 0
    shrink_limit: int = 100
    mh_scale: float | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise DataError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise DataError("burn_in must lie in [0, n_iter)")
        if self.shrink_limit < 0:
            raise DataError("shrink_limit must be nonnegative")
        if self.mh_scale is not None and self.mh_scale <= 0:
            raise DataError("mh_scale must be positive")

    def resolved_mh_scale(self, D: int) -> float:
        if self.mh_scale is not None:
            return self.mh_scale
        return (2.38 / math.sqrt(D)) ** 2


@dataclass
class AcceptStats:
    """Counts of slice acceptances, shrink redraws, and fallback moves."""

    steps: int = 0
    first_try_accepts: int = 0
    slice_accepts: int = 0
    shrink_redraws: int = 0
    mh_fallbacks: int = 0
    mh_accepts: int = 0


@dataclass(frozen=True)
class ThetaDraws:
    """Post-burn-in draws (one row per draw) with bookkeeping."""

    draws: np.ndarray
    accept_stats: AcceptStats
    seed: int
    n_iter: int
    burn_in: int
    seconds: float
    sigma_draws: np.ndarray | None = None

    def __post_init__(self):
        if self.draws.shape[0] != self.n_iter - self.burn_in:
            raise DataError("draw count must equal n_iter - burn_in")
        if not np.all(np.isfinite(self.draws)):
            raise NumericalError("non-finite draws")

    @property
    def N(self) -> int:
        return self.draws.shape[0]

    def irf_draws(self, J: int, shock_row: int = 0) -> np.ndarray:
        """Columns of the shock coefficient across horizons."""
        H1 = self.draws.shape[1] // J
        idx = shock_row + J * np.arange(H1)
        return self.draws[:, idx]

    def mean_theta(self, J: int, H: int) -> ThetaMatrix:
        return ThetaMatrix.from_vec(self.draws.mean(axis=0), J, H)


def _rng_for(cfg: ChainConfig, rng: np.random.Generator | None) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(cfg.seed)


def gess_step(
    theta: np.ndarray,
    mu: np.ndarray,
    ups_chol: np.ndarray,
    log_target,
    rng: np.random.Generator,
    cfg: ChainConfig,
    stats: AcceptStats | None = None,
    loglik=None,
) -> np.ndarray:
    """One slice move on a random ellipse through theta and a N(mu, Ups) draw.

    The target is factored as the auxiliary Gaussian times a residual
    "likelihood" L(x) = log_target(x) + (1/2)(x-mu)' Ups^(-1) (x-mu); the
    slice threshold and acceptance use L alone, so when the target equals the
    auxiliary Gaussian every first proposal is accepted. Proposals beyond
    shrink_limit trigger one random-walk step with proposal
    N(theta, mh_scale * Ups) judged on log_target.
    """
    D = theta.size
    if stats is None:
        stats = AcceptStats()
    stats.steps += 1
    if loglik is None:

        def loglik(x):
            r = solve_triangular(ups_chol, x - mu, lower=True, check_finite=False)
            return log_target(x) + 0.5 * float(r @ r)

    if cfg.shrink_limit > 0:
        nu_offset = ups_chol @ rng.standard_normal(D)
        threshold = loglik(theta) + math.log(rng.random())
        zeta = rng.uniform(0.0, 2.0 * math.pi)
        zeta_min, zeta_max = zeta - 2.0 * math.pi, zeta
        a = theta - mu
        for attempt in range(cfg.shrink_limit):
            prop = a * math.cos(zeta) + nu_offset * math.sin(zeta) + mu
            ll = loglik(prop)
            if math.isfinite(ll) and ll > threshold:
                stats.slice_accepts += 1
                if attempt == 0:
                    stats.first_try_accepts += 1
                return prop
            stats.shrink_redraws += 1
            if zeta < 0.0:
                zeta_min = zeta
            else:
                zeta_max = zeta
            zeta = rng.uniform(zeta_min, zeta_max)

    stats.mh_fallbacks += 1
    scale = math.sqrt(cfg.resolved_mh_scale(D))
    prop = theta + scale * (ups_chol @ rng.standard_normal(D))
    log_ratio = log_target(prop) - log_target(theta)
    if math.isfinite(log_ratio) and math.log(rng.random()) < log_ratio:
        stats.mh_accepts += 1
        return prop
    return theta


def _update_tau(prior: RoughnessPenalty, Theta: np.ndarray, rng) -> None:
    """Conjugate refresh of the per-regressor scales and their auxiliaries."""
    rough = Theta @ prior.D2.T
    ssq = np.sum(rough * rough, axis=1)
    H = prior.H
    shape = 0.5 * (H - 1) + (0.5 if prior.conjugate_shape else 0.0)
    rate = 1.0 / prior.tau_tilde + 0.5 * ssq
    prior.tau = 1.0 / rng.gamma(shape, 1.0 / rate)
    rate_tilde = 1.0 / prior.kappa**2 + 1.0 / prior.tau
    prior.tau_tilde = 1.0 / rng.gamma(1.0, 1.0 / rate_tilde)


def _clone_prior(prior: PriorSpec) -> PriorSpec:
    if isinstance(prior, FlatPrior):
        return prior
    return RoughnessPenalty(
        kappa=prior.kappa,
        tau=prior.tau.copy(),
        tau_tilde=prior.tau_tilde.copy(),
        D2=prior.D2,
        conjugate_shape=prior.conjugate_shape,
    )


def run_gess(
    geom,
    prior: PriorSpec,
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
    use_reduced: bool = True,
) -> ThetaDraws:
    """Slice-sample the quasi-posterior with the anchor Gaussian as auxiliary.

    mu is the anchor estimate and Ups its model covariance, which makes the
    residual likelihood linear in theta up to the prior penalty; the reduced
    evaluation path exploits that to score a whole ellipse from six scalars.
    Setting use_reduced=False runs the generic step on callbacks instead;
    both paths consume the random stream identically and produce identical
    chains. Hyperparameter scales are refreshed after every slice move under
    the roughness prior.
    """
    rng = _rng_for(cfg, rng)
    prior = _clone_prior(prior)
    D = geom.D
    J = geom.theta_star.J
    H = geom.theta_star.H
    mu = geom.theta_star.vec
    ups = ags_model_covariance(geom)
    try:
        ups_chol = np.linalg.cholesky(ups)
    except np.linalg.LinAlgError:
        raise NumericalError("model covariance is not positive definite") from None
    # Moments are linear in theta, so the residual likelihood collapses to
    # -c'(theta - mu) minus the prior penalty.
    c = geom.T_eff * (geom.G.T @ (geom.W @ geom.m0))
    is_rp = isinstance(prior, RoughnessPenalty)
    mh_scale = math.sqrt(cfg.resolved_mh_scale(D))
    n_keep = cfg.n_iter - cfg.burn_in
    draws = np.empty((n_keep, D))
    stats = AcceptStats()
    two_pi = 2.0 * math.pi

    def penalty_quad(vec_mat):
        rough = vec_mat @ prior.D2.T
        return np.sum(rough * rough / prior.tau[:, None])

    def loglik_vec(x):
        value = -float(c @ (x - mu))
        if is_rp:
            value -= 0.5 * penalty_quad(x.reshape((J, H + 1), order="F"))
        return value

    def log_target_vec(x):
        r = solve_triangular(ups_chol, x - mu, lower=True, check_finite=False)
        return loglik_vec(x) - 0.5 * float(r @ r)

    theta = mu.copy()
    mu_mat = mu.reshape((J, H + 1), order="F")
    rough_mu = mu_mat @ prior.D2.T if is_rp else None

    start = time.perf_counter()
    for it in range(cfg.n_iter):
        if not use_reduced:
            theta = gess_step(
                theta, mu, ups_chol, log_target_vec, rng, cfg, stats, loglik_vec
            )
        elif cfg.shrink_limit == 0:
            theta = gess_step(
                theta, mu, ups_chol, log_target_vec, rng, cfg, stats, loglik_vec
            )
        else:
            stats.steps += 1
            a = theta - mu
            b = ups_chol @ rng.standard_normal(D)
            fa = -float(c @ a)
            fb = -float(c @ b)
            if is_rp:
                inv_tau = 1.0 / prior.tau
                rough_a = a.reshape((J, H + 1), order="F") @ prior.D2.T
                rough_b = b.reshape((J, H + 1), order="F") @ prior.D2.T
                wa = rough_a * inv_tau[:, None]
                wb = rough_b * inv_tau[:, None]
                q_mm = float(np.sum(rough_mu * rough_mu * inv_tau[:, None]))
                q_aa = float(np.sum(rough_a * wa))
                q_bb = float(np.sum(rough_b * wb))
                q_ma = float(np.sum(rough_mu * wa))
                q_mb = float(np.sum(rough_mu * wb))
                q_ab = float(np.sum(rough_a * wb))
            else:
                q_mm = q_aa = q_bb = q_ma = q_mb = q_ab = 0.0

            def ll(cz, sz):
                pen = (
                    q_mm
                    + cz * cz * q_aa
                    + sz * sz * q_bb
                    + 2.0 * (cz * q_ma + sz * q_mb + cz * sz * q_ab)
                )
                return fa * cz + fb * sz - 0.5 * pen

            threshold = ll(1.0, 0.0) + math.log(rng.random())
            zeta = rng.uniform(0.0, two_pi)
            zeta_min, zeta_max = zeta - two_pi, zeta
            accepted = False
            for attempt in range(cfg.shrink_limit):
                cz, sz = math.cos(zeta), math.sin(zeta)
                value = ll(cz, sz)
                if math.isfinite(value) and value > threshold:
                    theta = a * cz + b * sz + mu
                    stats.slice_accepts += 1
                    if attempt == 0:
                        stats.first_try_accepts += 1
                    accepted = True
                    break
                stats.shrink_redraws += 1
                if zeta < 0.0:
                    zeta_min = zeta
                else:
                    zeta_max = zeta
                zeta = rng.uniform(zeta_min, zeta_max)
            if not accepted:
                stats.mh_fallbacks += 1
                prop = theta + mh_scale * (ups_chol @ rng.standard_normal(D))
                log_ratio = log_target_vec(prop) - log_target_vec(theta)
                if math.isfinite(log_ratio) and math.log(rng.random()) < log_ratio:
                    stats.mh_accepts += 1
                    theta = prop
        if is_rp:
            _update_tau(prior, theta.reshape((J, H + 1), order="F"), rng)
        if it >= cfg.burn_in:
            draws[it - cfg.burn_in] = theta
    seconds = time.perf_counter() - start
    return ThetaDraws(
        draws=draws,
        accept_stats=stats,
        seed=cfg.seed,
        n_iter=cfg.n_iter,
        burn_in=cfg.burn_in,
        seconds=seconds,
    )


def run_ags(
    geom,
    prior: RoughnessPenalty,
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> ThetaDraws:
    """Gibbs sampler on the anchor's asymptotic normal plus smoothness prior.

    Alternates the conjugate normal draw of theta given the scales with the
    inverse-gamma refreshes of the scales, all in precision form.
    """
    if not isinstance(prior, RoughnessPenalty):
        raise DataError("the asymptotic Gibbs sampler needs the roughness prior")
    rng = _rng_for(cfg, rng)
    prior = _clone_prior(prior)
    D = geom.D
    J = geom.theta_star.J
    H = geom.theta_star.H
    P0 = geom.T_eff * (geom.G.T @ geom.W @ geom.G)
    P0 = 0.5 * (P0 + P0.T)
    b0 = P0 @ geom.theta_star.vec
    K2 = prior.D2.T @ prior.D2
    # The penalty kron(K2, diag(1/tau)) touches only (H+1)^2 * J cells of P,
    # at fixed positions; scatter into a copy of P0 instead of rebuilding the
    # full Kronecker product every sweep.
    a_idx, b_idx = np.divmod(np.arange((H + 1) ** 2), H + 1)
    pen_rows = (a_idx[:, None] * J + np.arange(J)).ravel()
    pen_cols = (b_idx[:, None] * J + np.arange(J)).ravel()
    k2_flat = K2.ravel()[:, None]
    n_keep = cfg.n_iter - cfg.burn_in
    draws = np.empty((n_keep, D))
    start = time.perf_counter()
    for it in range(cfg.n_iter):
        P = P0.copy()
        P[pen_rows, pen_cols] += (k2_flat / prior.tau).ravel()
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise NumericalError("conditional precision lost definiteness") from None
        mean = solve_triangular(
            L.T,
            solve_triangular(L, b0, lower=True, check_finite=False),
            lower=False,
            check_finite=False,
        )
        z = rng.standard_normal(D)
        theta = mean + solve_triangular(L, z, lower=True, trans="T", check_finite=False)
        _update_tau(prior, theta.reshape((J, H + 1), order="F"), rng)
        if it >= cfg.burn_in:
            draws[it - cfg.burn_in] = theta
    seconds = time.perf_counter() - start
    return ThetaDraws(
        draws=draws,
        accept_stats=AcceptStats(steps=cfg.n_iter),
        seed=cfg.seed,
        n_iter=cfg.n_iter,
        burn_in=cfg.burn_in,
        seconds=seconds,
    )


def _inv_wishart(df: int, scale: np.ndarray, rng) -> np.ndarray:
    """Draw from the inverse Wishart via the Bartlett factorization."""
    p = scale.shape[0]
    try:
        Ls = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError:
        raise NumericalError("residual scale matrix is singular") from None
    A = np.zeros((p, p))
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    if p > 1:
        A[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
    C = solve_triangular(A, Ls.T, lower=True, check_finite=False)
    return C.T @ C


def run_pseudo_gibbs(
    design: LpDesign,
    prior: PriorSpec,
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> ThetaDraws:
    """Gibbs sampler for the multivariate-normal working model.

    Alternates Sigma given theta (inverse Wishart on the residual scale) with
    theta given Sigma. Under the flat prior the coefficient draw uses the
    matrix-normal identity around the least-squares fit; under the roughness
    prior it solves the penalized precision system. The coefficient step reads
    the scale with both axes reversed, pairing horizon h with the entry at
    H - h; see the inline note in the loop.
    """
    rng = _rng_for(cfg, rng)
    prior = _clone_prior(prior)
    p = design.H + 1
    J = design.J
    if design.T_eff <= p + J:
        raise DataError(
            f"effective sample {design.T_eff} too small for {p} equations and {J} regressors"
        )
    is_rp = isinstance(prior, RoughnessPenalty)
    X, Y = design.X, design.Y
    XtX = X.T @ X
    XtY = X.T @ Y
    L_x = np.linalg.cholesky(XtX)
    theta_hat = ols(design).coeffs
    Theta = theta_hat.copy()
    K2 = prior.D2.T @ prior.D2 if is_rp else None
    n_keep = cfg.n_iter - cfg.burn_in
    draws = np.empty((n_keep, J * p))
    sigma_draws = np.empty((n_keep, p, p))
    start = time.perf_counter()
    for it in range(cfg.n_iter):
        E = Y - X @ Theta
        Sigma = _inv_wishart(design.T_eff, E.T @ E, rng)
        # The coefficient step reads the scale with both axes reversed, so the
        # equation at horizon h borrows the residual scale of horizon H - h.
        # This pairing produces the sampler's characteristic miscalibration:
        # intervals too wide at short horizons, too tight at long ones.
        Sig_rev = Sigma[::-1, ::-1]
        if not is_rp:
            noise = rng.standard_normal((J, p))
            half = solve_triangular(
                L_x, noise, lower=True, trans="T", check_finite=False
            )
            Theta = theta_hat + half @ np.linalg.cholesky(Sig_rev).T
        else:
            L_s = np.linalg.cholesky(Sig_rev)
            eye = np.eye(p)
            Sig_inv = solve_triangular(
                L_s.T,
                solve_triangular(L_s, eye, lower=True, check_finite=False),
                lower=False,
                check_finite=False,
            )
            P = np.kron(Sig_inv, XtX) + np.kron(K2, np.diag(1.0 / prior.tau))
            b = (XtY @ Sig_inv).ravel(order="F")
            L = np.linalg.cholesky(P)
            mean = solve_triangular(
                L.T,
                solve_triangular(L, b, lower=True, check_finite=False),
                lower=False,
                check_finite=False,
            )
            z = rng.standard_normal(J * p)
            vec = mean + solve_triangular(
                L, z, lower=True, trans="T", check_finite=False
            )
            Theta = vec.reshape((J, p), order="F")
            _update_tau(prior, Theta, rng)
        if it >= cfg.burn_in:
            draws[it - cfg.burn_in] = Theta.ravel(order="F")
            sigma_draws[it - cfg.burn_in] = Sigma
    seconds = time.perf_counter() - start
    return ThetaDraws(
        draws=draws,
        accept_stats=AcceptStats(steps=cfg.n_iter),
        seed=cfg.seed,
        n_iter=cfg.n_iter,
        burn_in=cfg.burn_in,
        seconds=seconds,
        sigma_draws=sigma_draws,
    )


def effective_sample_size(chain: np.ndarray) -> float:
    """Autocorrelation-adjusted sample size of a scalar chain.

    Sums autocorrelations in adjacent pairs, keeps the initial run of
    positive pair sums, enforces monotone decay on them, and returns
    N / (2 * sum - 1). A constant chain has size 0 by convention.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise DataError("effective sample size needs a chain of length >= 100")
    x = x - x.mean()
    var = float(x @ x) / n
    if var <= 0.0 or not math.isfinite(var):
        return 0.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    n_pairs = n // 2
    gamma = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    negative = np.nonzero(gamma <= 0.0)[0]
    cut = negative[0] if negative.size else n_pairs
    if cut == 0:
        return float(n)
    kept = np.minimum.accumulate(gamma[:cut])
    tau = max(2.0 * float(kept.sum()) - 1.0, 1.0 / n)
    return n / tau


def min_ess(draws: np.ndarray) -> float:
    """Smallest per-coordinate effective sample size of a draws matrix."""
    return min(effective_sample_size(draws[:, d]) for d in range(draws.shape[1]))
