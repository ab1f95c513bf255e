"""Log-density kernels and the smoothness prior across horizons."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data_model import LpDesign
from .errors import DataError, NumericalError
from .estimators import LteGeometry, ThetaMatrix


def second_difference_matrix(H: int) -> np.ndarray:
    """(H-1) x (H+1) banded matrix of second-difference stencils (1, -2, 1)."""
    if H < 2:
        raise DataError("second differences need H >= 2")
    D2 = np.zeros((H - 1, H + 1))
    for r in range(H - 1):
        D2[r, r : r + 3] = (1.0, -2.0, 1.0)
    return D2


@dataclass(frozen=True)
class FlatPrior:
    """Improper uniform prior over the stacked coefficients."""


@dataclass
class RoughnessPenalty:
    """Gaussian smoothness prior on each regressor's across-horizon path.

    Each row j of the coefficient matrix gets an independent penalty
    ||D2 theta_j||^2 / (2 tau_j); the scale sqrt(tau_j) follows a half-Cauchy
    with scale kappa, represented through the inverse-gamma pair
    (tau_j, tau_tilde_j) so that both conditional updates stay conjugate.

    conjugate_shape selects the tau shape parameter: True uses the value the
    conjugate algebra implies ((H-1)/2 + 1/2); False uses (H-1)/2 for
    side-by-side comparison runs.
    """

    kappa: float
    tau: np.ndarray
    tau_tilde: np.ndarray
    D2: np.ndarray
    conjugate_shape: bool = True

    def __post_init__(self):
        if self.kappa <= 0:
            raise DataError("kappa must be positive")
        self.tau = np.asarray(self.tau, dtype=float).copy()
        self.tau_tilde = np.asarray(self.tau_tilde, dtype=float).copy()
        self.D2 = np.asarray(self.D2, dtype=float)
        if np.any(self.tau <= 0) or np.any(self.tau_tilde <= 0):
            raise DataError("tau and tau_tilde must be strictly positive")
        if self.tau.shape != self.tau_tilde.shape:
            raise DataError("tau and tau_tilde must have matching shapes")
        if self.D2.shape[1] != self.D2.shape[0] + 2:
            raise DataError("D2 must be (H-1) x (H+1)")

    @classmethod
    def create(cls, J: int, H: int, kappa: float = 100.0, **kwargs) -> "RoughnessPenalty":
        return cls(
            kappa=kappa,
            tau=np.ones(J),
            tau_tilde=np.ones(J),
            D2=second_difference_matrix(H),
            **kwargs,
        )

    @property
    def J(self) -> int:
        return self.tau.size

    @property
    def H(self) -> int:
        return self.D2.shape[1] - 1

    def penalty(self, theta_vec: np.ndarray) -> float:
        """Quadratic form theta' Q theta with Q the prior precision."""
        Theta = theta_vec.reshape((self.J, self.H + 1), order="F")
        rough = Theta @ self.D2.T
        return float(np.sum(rough * rough / self.tau[:, None]))

    def log_density(self, theta_vec: np.ndarray) -> float:
        return -0.5 * self.penalty(theta_vec)


PriorSpec = FlatPrior | RoughnessPenalty


@dataclass(frozen=True)
class PriorPrecision:
    """Prior precision Q = (D2'D2) kron diag(1/tau) for the stacked vector."""

    Q: np.ndarray = field(repr=False)

    @classmethod
    def from_prior(cls, prior: RoughnessPenalty) -> "PriorPrecision":
        Q = np.kron(prior.D2.T @ prior.D2, np.diag(1.0 / prior.tau))
        return cls(Q=Q)


def log_prior(theta_vec: np.ndarray, prior: PriorSpec) -> float:
    if isinstance(prior, FlatPrior):
        return 0.0
    return prior.log_density(theta_vec)


def log_quasi_posterior(
    theta: np.ndarray, geom: LteGeometry, prior: PriorSpec = FlatPrior()
) -> float:
    """Log kernel -(T_eff/2) mbar(theta)' W mbar(theta) + log p(theta).

    The moments are linear in theta, so mbar(theta) = m0 + G (theta - theta*)
    exactly; the constant |W|^(1/2) factor is dropped.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != geom.D:
        raise DataError(f"theta has length {theta.size}, expected {geom.D}")
    if not np.all(np.isfinite(theta)):
        raise DataError("theta must be finite")
    mbar = geom.m0 + geom.G @ (theta - geom.theta_star.vec)
    return float(-0.5 * geom.T_eff * (mbar @ geom.W @ mbar) + log_prior(theta, prior))


def log_pseudo_posterior(
    theta: np.ndarray,
    Sigma: np.ndarray,
    design: LpDesign,
    prior: PriorSpec = FlatPrior(),
) -> float:
    """Joint log kernel of the multivariate-normal working model.

    Combines the Gaussian system likelihood with common error covariance
    Sigma across the stacked horizon equations, the scale-invariant prior
    |Sigma|^(-(H+2)/2), and the coefficient prior.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    Sigma = np.asarray(Sigma, dtype=float)
    p = design.H + 1
    if Sigma.shape != (p, p):
        raise DataError(f"Sigma must be {p} x {p}")
    if theta.size != design.D:
        raise DataError(f"theta has length {theta.size}, expected {design.D}")
    try:
        factor = cho_factor(0.5 * (Sigma + Sigma.T), lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("Sigma is not positive definite") from None
    logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
    Theta = theta.reshape((design.J, p), order="F")
    E = design.Y - design.X @ Theta
    quad = float(np.sum(E * cho_solve(factor, E.T).T))
    jeffreys = -0.5 * (p + 1) * logdet
    return (
        -0.5 * design.T_eff * logdet - 0.5 * quad + jeffreys + log_prior(theta, prior)
    )


def ags_model_covariance(geom: LteGeometry) -> np.ndarray:
    """Normal-model covariance (G'WG)^(-1) / T_eff used by the Gibbs sampler."""
    A = geom.G.T @ geom.W @ geom.G
    try:
        factor = cho_factor(0.5 * (A + A.T), lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("G'WG is not positive definite") from None
    inv = cho_solve(factor, np.eye(geom.D))
    return 0.5 * (inv + inv.T) / geom.T_eff
