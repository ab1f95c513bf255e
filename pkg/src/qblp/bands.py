"""Pointwise credible intervals and simultaneous max-studentized bands."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm

from .errors import DataError, NumericalError


class BandMethod(Enum):
    PLUGIN_SUPT = "plugin"
    QUANTILE_SUPT = "quantile"


class PointwiseMode(Enum):
    RAW_QUANTILES = "raw"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class BandResult:
    """Per-horizon point path with pointwise and simultaneous 1-alpha bands.

    critical_value is the max-studentized critical value (plug-in method);
    xi is the per-tail quantile level (quantile method); each is NaN for the
    other method. attained is False when even the widest admissible quantile
    band cannot reach the requested simultaneous coverage.
    """

    point: np.ndarray
    pw_lower: np.ndarray
    pw_upper: np.ndarray
    sim_lower: np.ndarray
    sim_upper: np.ndarray
    critical_value: float
    xi: float
    alpha: float
    method: BandMethod
    attained: bool = True

    def __post_init__(self):
        n = self.point.size
        for name in ("pw_lower", "pw_upper", "sim_lower", "sim_upper"):
            if getattr(self, name).size != n:
                raise DataError(f"{name} must match the point path length")
        slack = 1e-9 * (1.0 + float(np.abs(self.point).max()))
        if np.any(self.pw_lower > self.point + slack) or np.any(
            self.pw_upper < self.point - slack
        ):
            raise NumericalError("pointwise interval does not bracket the point path")
        if np.any(self.sim_lower > self.pw_lower + slack) or np.any(
            self.sim_upper < self.pw_upper - slack
        ):
            raise NumericalError("simultaneous band does not contain the pointwise band")

    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.sim_upper - self.sim_lower)

    def covers(self, path: np.ndarray) -> bool:
        """Whether the simultaneous band contains the whole path."""
        path = np.asarray(path, dtype=float)
        return bool(
            np.all(path >= self.sim_lower) and np.all(path <= self.sim_upper)
        )


def hazen_quantile(values: np.ndarray, q: float, *, is_sorted: bool = False) -> float:
    """Quantile with plotting positions (k - 1/2)/n, linearly interpolated."""
    a = values if is_sorted else np.sort(np.asarray(values, dtype=float))
    n = a.size
    if n == 0:
        raise DataError("quantile of an empty sample")
    g = q * n - 0.5
    if g <= 0.0:
        return float(a[0])
    if g >= n - 1:
        return float(a[-1])
    lo = int(g)
    frac = g - lo
    return float(a[lo] * (1.0 - frac) + a[lo + 1] * frac)


def extract_irf_covariance(
    Omega: np.ndarray, shock_index: int, J: int, H: int
) -> np.ndarray:
    """Submatrix of the stacked covariance for one regressor across horizons."""
    Omega = np.asarray(Omega, dtype=float)
    D = J * (H + 1)
    if Omega.shape != (D, D):
        raise DataError(f"Omega must be {D} x {D}, got {Omega.shape}")
    if not 0 <= shock_index < J:
        raise DataError(f"shock index {shock_index} out of range [0, {J})")
    idx = shock_index + J * np.arange(H + 1)
    return Omega[np.ix_(idx, idx)]


def pointwise_interval(
    *,
    alpha: float,
    mode: PointwiseMode,
    draws1: np.ndarray | None = None,
    theta1_hat: np.ndarray | None = None,
    Omega1: np.ndarray | None = None,
    T_eff: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Equal-tailed per-horizon intervals, from draws or from a covariance."""
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    if mode is PointwiseMode.RAW_QUANTILES:
        if draws1 is None:
            raise DataError("raw quantile intervals need draws")
        draws1 = np.asarray(draws1, dtype=float)
        N = draws1.shape[0]
        if N * alpha / 2.0 < 10.0:
            raise DataError(
                f"{N} draws is too few to resolve the {alpha / 2:.4f} tail"
            )
        lower = np.array(
            [hazen_quantile(draws1[:, h], alpha / 2.0) for h in range(draws1.shape[1])]
        )
        upper = np.array(
            [
                hazen_quantile(draws1[:, h], 1.0 - alpha / 2.0)
                for h in range(draws1.shape[1])
            ]
        )
        return lower, upper
    if theta1_hat is None or Omega1 is None or T_eff is None:
        raise DataError("asymptotic intervals need theta1_hat, Omega1, and T_eff")
    theta1_hat = np.asarray(theta1_hat, dtype=float)
    scale = np.sqrt(np.diag(np.asarray(Omega1, dtype=float)) / T_eff)
    z = norm.ppf(1.0 - alpha / 2.0)
    return theta1_hat - z * scale, theta1_hat + z * scale


def supt_plugin(
    Omega1: np.ndarray,
    theta1_hat: np.ndarray,
    T_eff: int,
    alpha: float = 0.10,
    n_sim: int = 100_000,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> BandResult:
    """Simultaneous band from the max-studentized quantile of N(0, Omega1).

    Simulates the studentized maximum, takes its 1-alpha quantile as the
    critical value c (floored at the pointwise normal quantile, its
    population lower bound), and widens the asymptotic intervals to
    theta_hat +/- c * sqrt(diag(Omega1)/T_eff).
    """
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    if n_sim < 1000:
        raise DataError("n_sim too small for a stable critical value")
    Omega1 = np.asarray(Omega1, dtype=float)
    theta1_hat = np.asarray(theta1_hat, dtype=float)
    try:
        L = np.linalg.cholesky(0.5 * (Omega1 + Omega1.T))
    except np.linalg.LinAlgError:
        raise NumericalError("Omega1 is not positive definite") from None
    sd = np.sqrt(np.diag(Omega1))
    if rng is None:
        rng = np.random.default_rng(seed)
    E = rng.standard_normal((n_sim, Omega1.shape[0])) @ L.T
    max_stud = np.max(np.abs(E) / sd, axis=1)
    z = norm.ppf(1.0 - alpha / 2.0)
    c = max(hazen_quantile(max_stud, 1.0 - alpha), z)
    scale = sd / math.sqrt(T_eff)
    return BandResult(
        point=theta1_hat,
        pw_lower=theta1_hat - z * scale,
        pw_upper=theta1_hat + z * scale,
        sim_lower=theta1_hat - c * scale,
        sim_upper=theta1_hat + c * scale,
        critical_value=float(c),
        xi=float("nan"),
        alpha=alpha,
        method=BandMethod.PLUGIN_SUPT,
    )


def supt_quantile(draws1: np.ndarray, alpha: float = 0.10) -> BandResult:
    """Simultaneous band from joint coverage of per-horizon quantile boxes.

    Searches for the largest per-tail level xi in [1/N, alpha/2] whose box of
    per-horizon (xi, 1-xi) quantiles contains at least a 1-alpha fraction of
    the draws; coverage is monotone in xi, so bisection suffices.
    """
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    draws1 = np.asarray(draws1, dtype=float)
    if draws1.ndim != 2:
        raise DataError("draws must be N x (H+1)")
    N = draws1.shape[0]
    if N < 1000:
        raise DataError("need at least 1000 draws for a simultaneous band")
    sorted_cols = np.sort(draws1, axis=0)
    n_h = draws1.shape[1]

    def box(xi):
        lower = np.array(
            [hazen_quantile(sorted_cols[:, h], xi, is_sorted=True) for h in range(n_h)]
        )
        upper = np.array(
            [
                hazen_quantile(sorted_cols[:, h], 1.0 - xi, is_sorted=True)
                for h in range(n_h)
            ]
        )
        return lower, upper

    def coverage(xi):
        lower, upper = box(xi)
        inside = np.all((draws1 >= lower) & (draws1 <= upper), axis=1)
        return float(inside.mean())

    target = 1.0 - alpha
    xi_hi = alpha / 2.0
    xi_lo = 1.0 / N
    attained = True
    if coverage(xi_hi) >= target:
        xi_hat = xi_hi
    elif coverage(xi_lo) < target:
        attained = False
        xi_hat = xi_lo
    else:
        lo, hi = xi_lo, xi_hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if coverage(mid) >= target:
                lo = mid
            else:
                hi = mid
        xi_hat = lo
    sim_lower, sim_upper = box(xi_hat)
    pw_lower, pw_upper = box(alpha / 2.0)
    return BandResult(
        point=draws1.mean(axis=0),
        pw_lower=pw_lower,
        pw_upper=pw_upper,
        sim_lower=sim_lower,
        sim_upper=sim_upper,
        critical_value=float("nan"),
        xi=float(xi_hat),
        alpha=alpha,
        method=BandMethod.QUANTILE_SUPT,
        attained=attained,
    )
