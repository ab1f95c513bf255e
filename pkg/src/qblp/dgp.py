"""Finite moving-average data generator with a known shock response path."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data_model import TimeSeriesData
from .errors import DataError


class DgpMode(Enum):
    """Whether the first variable reveals the shock or instruments proxy it."""

    SHOCK_OBSERVED = "shock-observed"
    IV = "iv"


def true_irf(L: int, denominator: str = "printed") -> np.ndarray:
    """Response path of variable 2 to shock 1: (l+1) e^{0.5(1-l)} normalized.

    The "printed" denominator sums the unnormalized weights over l = 1..L;
    "full" sums over l = 0..L instead (which would make the path sum to one).
    """
    if L < 1:
        raise DataError("L must be at least 1")
    if denominator not in ("printed", "full"):
        raise DataError("denominator must be 'printed' or 'full'")
    l = np.arange(L + 1)
    weights = (l + 1) * np.exp(0.5 * (1.0 - l))
    start = 1 if denominator == "printed" else 0
    return weights / weights[start:].sum()


@dataclass(frozen=True)
class VmaParams:
    """Coefficients w_t = sum_l Gammas[l] eps_{t-l} plus the instrument design."""

    L: int
    M: int
    Gammas: np.ndarray
    mode: DgpMode
    irf: np.ndarray
    R: int = 0
    rho: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        Gammas = np.asarray(self.Gammas, dtype=float)
        if Gammas.shape != (self.L + 1, self.M, self.M):
            raise DataError("Gammas must be (L+1) x M x M")
        if self.M < 2:
            raise DataError("need at least two variables")
        if not np.allclose(Gammas[:, 1, 0], self.irf):
            raise DataError("the (2,1) coefficient path must equal the response path")
        if self.mode is DgpMode.SHOCK_OBSERVED:
            if Gammas[0, 0, 0] != 1.0 or np.any(Gammas[0, 0, 1:] != 0.0):
                raise DataError("observed-shock mode needs Gamma_0 row 1 = e_1")
            if np.any(Gammas[1:, 0, :] != 0.0):
                raise DataError("observed-shock mode needs zero row 1 at lags >= 1")
        else:
            if Gammas[0, 0, 0] != 1.0:
                raise DataError("iv mode needs the unit impact normalization")
            if self.R < 1:
                raise DataError("iv mode needs at least one instrument")
            if not 0.0 <= self.rho < 1.0:
                raise DataError("rho must lie in [0, 1)")
            if self.beta < 0.0:
                raise DataError("beta must be nonnegative")
        object.__setattr__(self, "Gammas", Gammas)
        object.__setattr__(self, "irf", np.asarray(self.irf, dtype=float))


def build_vma(
    L: int,
    M: int,
    mode: DgpMode,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    R: int = 1,
    rho: float = 0.0,
    beta: float = 1.0,
    denominator: str = "printed",
    gamma_star: float | None = None,
    response_scale: float = 1.0,
) -> VmaParams:
    """Draw the free coefficients and impose the mode's constraints.

    Every free entry shares one draw gamma* ~ U(0, 0.5) per (m, m') cell and
    decays across lags with weight (L+2-l)/(L+1)/2; passing `gamma_star`
    pins every free cell to that value instead of drawing. The (2,1) path is
    set to the closed-form response, and the shock's own impact is normalized
    to 1. `response_scale` multiplies the whole second row of every
    coefficient matrix, scaling the response variable (and with it the true
    response path) without touching the other variables.
    """
    if M < 2:
        raise DataError("need at least two variables")
    if L < 1:
        raise DataError("L must be at least 1")
    if gamma_star is not None and not 0.0 < gamma_star < 1.0:
        raise DataError("gamma_star must lie in (0, 1)")
    if response_scale <= 0.0:
        raise DataError("response_scale must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    if gamma_star is None:
        cells = rng.uniform(0.0, 0.5, size=(M, M))
    else:
        cells = np.full((M, M), float(gamma_star))
    lags = np.arange(L + 1)
    decay = 0.5 * (L + 2.0 - lags) / (L + 1.0)
    Gammas = decay[:, None, None] * cells[None, :, :]
    irf = true_irf(L, denominator)
    Gammas[:, 1, 0] = irf
    Gammas[:, 1, :] *= response_scale
    if mode is DgpMode.SHOCK_OBSERVED:
        Gammas[0, 0, :] = 0.0
        Gammas[0, 0, 0] = 1.0
        Gammas[1:, 0, :] = 0.0
        R = 0
    else:
        Gammas[0, 0, 0] = 1.0
    return VmaParams(
        L=L,
        M=M,
        Gammas=Gammas,
        mode=mode,
        irf=response_scale * irf,
        R=R,
        rho=rho,
        beta=beta,
    )


@dataclass(frozen=True)
class SimResult:
    """Generated sample plus the latent shock trace for oracle checks."""

    data: TimeSeriesData
    eps1: np.ndarray
    params: VmaParams


def simulate(
    params: VmaParams,
    T: int,
    H: int,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> SimResult:
    """Generate T + H usable rows of the moving average (plus instruments).

    Exactly L presample shock vectors are drawn so every emitted row is an
    exact function of i.i.d. standard normal shocks; no burn-in is needed.
    In instrument mode, R extra columns follow
    z_{r,t} = (eps1_t + rho * z_{1,t-1} + sqrt(1-rho^2) * beta * noise_{r,t}) / R
    with the lagged first instrument starting at zero.
    """
    if T < 1 or H < 0:
        raise DataError("need T >= 1 and H >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    n = T + H
    L, M = params.L, params.M
    eps = rng.standard_normal((L + n, M))
    W = np.zeros((n, M))
    for l in range(L + 1):
        W += eps[L - l : L - l + n] @ params.Gammas[l].T
    eps1 = eps[L:, 0].copy()
    names = tuple(f"w{m + 1}" for m in range(M))
    values = W
    if params.mode is DgpMode.IV:
        R = params.R
        noise = rng.standard_normal((n, R))
        Z = np.empty((n, R))
        z1_prev = 0.0
        scale = np.sqrt(1.0 - params.rho**2) * params.beta
        for t in range(n):
            Z[t] = (eps1[t] + params.rho * z1_prev + scale * noise[t]) / R
            z1_prev = Z[t, 0]
        names = names + tuple(f"z{r + 1}" for r in range(R))
        values = np.hstack([W, Z])
    return SimResult(
        data=TimeSeriesData(values=values, names=names),
        eps1=eps1,
        params=params,
    )
