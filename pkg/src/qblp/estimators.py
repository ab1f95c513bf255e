"""Point estimators, stacked moment functions, and covariance estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data_model import LpDesign
from .errors import DataError, NumericalError


@dataclass(frozen=True)
class ThetaMatrix:
    """J x (H+1) coefficient matrix; column h holds the horizon-h equation."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 2:
            raise DataError("coeffs must be 2-d (J x (H+1))")
        if not np.all(np.isfinite(coeffs)):
            raise DataError("coeffs must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def J(self) -> int:
        return self.coeffs.shape[0]

    @property
    def H(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def vec(self) -> np.ndarray:
        """Stacked coefficients, horizon-major (all of horizon 0 first)."""
        return self.coeffs.ravel(order="F")

    @classmethod
    def from_vec(cls, v: np.ndarray, J: int, H: int) -> "ThetaMatrix":
        v = np.asarray(v, dtype=float)
        if v.size != J * (H + 1):
            raise DataError(f"vector length {v.size} != J(H+1) = {J * (H + 1)}")
        return cls(v.reshape((J, H + 1), order="F"))

    def irf(self, shock_row: int = 0) -> np.ndarray:
        """Shock-coefficient path across horizons."""
        return self.coeffs[shock_row].copy()


@dataclass(frozen=True)
class MomentCovKind:
    """Moment covariance estimator: plain outer products or kernel-weighted."""

    kind: str
    S: int | None = None

    def __post_init__(self):
        if self.kind not in ("standard", "newey-west"):
            raise DataError(f"unknown covariance kind {self.kind!r}")
        if self.S is not None:
            if self.kind == "standard":
                raise DataError("bandwidth only applies to the newey-west kind")
            if self.S < 1:
                raise DataError("bandwidth must be at least 1")

    @classmethod
    def standard(cls) -> "MomentCovKind":
        return cls("standard")

    @classmethod
    def newey_west(cls, S: int | None = None) -> "MomentCovKind":
        return cls("newey-west", S)

    def bandwidth(self, T_eff: int) -> int:
        """Lag truncation; the default grows like 1.3 * sqrt(sample size)."""
        if self.kind == "standard":
            return 0
        if self.S is not None:
            return self.S
        return int(np.rint(1.3 * np.sqrt(T_eff)))


@dataclass(frozen=True)
class LteGeometry:
    """Frozen quadratic geometry of the GMM criterion at the anchor estimate.

    Holds the anchor theta_star, the moment mean m0 there, the Jacobian G of
    the stacked moment mean, the moment covariance V, and the weighting
    matrix W (inverse of V up to jitter). Because the moments are linear in
    theta, these five objects determine the criterion exactly everywhere.
    """

    theta_star: ThetaMatrix
    m0: np.ndarray
    G: np.ndarray
    V: np.ndarray
    W: np.ndarray
    T_eff: int
    use_iv: bool
    kind: MomentCovKind

    def __post_init__(self):
        for name in ("V", "W"):
            mat = getattr(self, name)
            if not np.allclose(mat, mat.T, atol=1e-10 * (1 + np.abs(mat).max())):
                raise NumericalError(f"{name} is not symmetric")

    @property
    def D(self) -> int:
        return self.G.shape[1]


def _lstsq_full_rank(A: np.ndarray, B: np.ndarray, label: str) -> np.ndarray:
    coef, _, rank, sv = np.linalg.lstsq(A, B, rcond=None)
    if rank < A.shape[1]:
        raise NumericalError(
            f"rank-deficient {label}: smallest singular value {sv[-1]:.3e}"
        )
    return coef


def ols(design: LpDesign) -> ThetaMatrix:
    """Least-squares coefficients for every horizon, one shared factorization."""
    return ThetaMatrix(_lstsq_full_rank(design.X, design.Y, "regressor matrix"))


def tsls(design: LpDesign) -> ThetaMatrix:
    """Two-stage least squares: regress Y on the projection of X onto span(Z)."""
    if design.Z is None:
        raise DataError("design has no instrument block")
    first_stage = _lstsq_full_rank(design.Z, design.X, "instrument matrix")
    X_hat = design.Z @ first_stage
    return ThetaMatrix(_lstsq_full_rank(X_hat, design.Y, "projected regressor matrix"))


def _instrument_block(design: LpDesign, use_iv: bool) -> np.ndarray:
    if use_iv:
        if design.Z is None:
            raise DataError("use_iv requested but the design has no Z block")
        return design.Z
    return design.X


def moment_mean(theta: ThetaMatrix, design: LpDesign, use_iv: bool = False) -> np.ndarray:
    """Average stacked moment vector, horizon-major.

    Block h holds (1/T_eff) sum_t a_t (y_{t+h} - theta_(h)' x_t) with a_t the
    regressors (or instruments when use_iv is set).
    """
    if theta.coeffs.shape != (design.J, design.H + 1):
        raise DataError(
            f"theta shape {theta.coeffs.shape} does not match design "
            f"({design.J}, {design.H + 1})"
        )
    A = _instrument_block(design, use_iv)
    U = design.Y - design.X @ theta.coeffs
    return (A.T @ U).ravel(order="F") / design.T_eff


def _moment_rows(design: LpDesign, theta: ThetaMatrix, use_iv: bool) -> np.ndarray:
    """Per-period stacked moment contributions, one row per t."""
    A = _instrument_block(design, use_iv)
    U = design.Y - design.X @ theta.coeffs
    return (U[:, :, None] * A[:, None, :]).reshape(design.T_eff, -1)


def moment_covariance(
    theta_star: ThetaMatrix,
    design: LpDesign,
    kind: MomentCovKind,
    use_iv: bool = False,
) -> np.ndarray:
    """Long-run covariance of the stacked moments at the anchor.

    The standard kind averages outer products; the kernel kind adds Bartlett-
    weighted lag cross-products (weights 1 - s/(S+1)) and symmetrizes.
    """
    rows = _moment_rows(design, theta_star, use_iv)
    T_eff = design.T_eff
    V = rows.T @ rows / T_eff
    S = kind.bandwidth(T_eff)
    if S >= T_eff:
        raise DataError(f"bandwidth {S} must be smaller than the sample {T_eff}")
    for s in range(1, S + 1):
        B = rows[s:].T @ rows[:-s] / T_eff
        V += (1.0 - s / (S + 1.0)) * (B + B.T)
    return 0.5 * (V + V.T)


def _spd_inverse(V: np.ndarray, label: str) -> np.ndarray:
    """Invert a symmetric PSD matrix, escalating a diagonal jitter if needed."""
    scale = np.mean(np.diag(V))
    eye = np.eye(V.shape[0])
    for lam in (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8):
        try:
            factor = cho_factor(V + lam * scale * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
        inv = cho_solve(factor, eye)
        return 0.5 * (inv + inv.T)
    raise NumericalError(f"{label} is numerically singular beyond the jitter budget")


def lte_geometry(
    design: LpDesign,
    kind: MomentCovKind,
    use_iv: bool = False,
) -> LteGeometry:
    """Anchor estimate plus the frozen (G, V, W) of the GMM criterion."""
    theta_star = tsls(design) if use_iv else ols(design)
    m0 = moment_mean(theta_star, design, use_iv)
    V = moment_covariance(theta_star, design, kind, use_iv)
    W = _spd_inverse(V, "moment covariance")
    A = _instrument_block(design, use_iv)
    G = np.kron(np.eye(design.H + 1), -(A.T @ design.X) / design.T_eff)
    return LteGeometry(
        theta_star=theta_star,
        m0=m0,
        G=G,
        V=V,
        W=W,
        T_eff=design.T_eff,
        use_iv=use_iv,
        kind=kind,
    )


def asymptotic_covariance(geom: LteGeometry) -> np.ndarray:
    """Sandwich covariance (G'WG)^(-1) G'WVWG (G'WG)^(-1).

    The per-draw posterior covariance is this matrix divided by T_eff. When W
    is the inverse of V the sandwich collapses to (G'WG)^(-1).
    """
    GtW = geom.G.T @ geom.W
    A = GtW @ geom.G
    B = GtW @ geom.V @ GtW.T
    try:
        factor = cho_factor(0.5 * (A + A.T), lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("G'WG is not positive definite") from None
    omega = cho_solve(factor, cho_solve(factor, B).T)
    return 0.5 * (omega + omega.T)


def muller_sandwich(
    design: LpDesign,
    theta_hat: ThetaMatrix,
    kind: MomentCovKind,
) -> np.ndarray:
    """Per-horizon sandwich covariances T_eff (X'X)^(-1) V_(h) (X'X)^(-1).

    V_(h) is the (kernel-weighted) covariance of the horizon-h score x_t u_t,
    with residuals taken at theta_hat. Returns an (H+1, J, J) array whose
    h-th slice estimates the covariance of the horizon-h coefficient vector.
    """
    X = design.X
    T_eff = design.T_eff
    U = design.Y - X @ theta_hat.coeffs
    S = kind.bandwidth(T_eff)
    if S >= T_eff:
        raise DataError(f"bandwidth {S} must be smaller than the sample {T_eff}")
    XtX = X.T @ X
    try:
        factor = cho_factor(XtX, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("X'X is not positive definite") from None
    out = np.empty((design.H + 1, design.J, design.J))
    for h in range(design.H + 1):
        rows = X * U[:, h:h + 1]
        V_h = rows.T @ rows / T_eff
        for s in range(1, S + 1):
            B = rows[s:].T @ rows[:-s] / T_eff
            V_h += (1.0 - s / (S + 1.0)) * (B + B.T)
        sand = T_eff * cho_solve(factor, cho_solve(factor, V_h).T)
        out[h] = 0.5 * (sand + sand.T)
    return out
