"""Prior construction: GP kernel over horizons, shrinkage hierarchy, controls.

All defaults assume standardized data. The kernel couples responses across
horizons through a squared-exponential term scaled by a horizon-decay factor;
the normal-gamma hierarchy supplies the global-local variances that decide
how hard each response is pulled toward the smooth prior mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from sulp.errors import KernelNotPDError, SULPError


@dataclass
class GPKernelParams:
    """Squared-exponential kernel state and its truncated-normal priors."""

    xi: float = 0.1
    varsigma: float = 0.0
    xi_low: float = 0.01
    xi_high: float = 1.0
    varsigma_low: float = 0.0
    varsigma_high: float = 10.0
    m_xi: float = 0.1
    v_xi: float = 0.1
    m_varsigma: float = 0.0
    v_varsigma: float = 3.0

    def __post_init__(self) -> None:
        if not (self.xi_low < self.xi <= self.xi_high):
            raise SULPError(f"xi={self.xi} outside ({self.xi_low}, {self.xi_high}]")
        if not (self.varsigma_low <= self.varsigma <= self.varsigma_high):
            raise SULPError(
                f"varsigma={self.varsigma} outside [{self.varsigma_low}, {self.varsigma_high}]"
            )
        if self.v_xi <= 0 or self.v_varsigma <= 0:
            raise SULPError("kernel prior variances must be positive")


@dataclass
class NGParams:
    """Normal-gamma shrinkage hyperparameters and states."""

    a_tau: float = 0.01
    b_tau: float = 0.01
    theta_lambda: float = 0.1
    tau2_tilde: float = 1.0
    lambda2: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self) -> None:
        self.lambda2 = np.asarray(self.lambda2, dtype=float)
        if min(self.a_tau, self.b_tau, self.theta_lambda, self.tau2_tilde) <= 0:
            raise SULPError("normal-gamma parameters must be strictly positive")
        if np.any(self.lambda2 <= 0):
            raise SULPError("local variances must be strictly positive")

    @property
    def tau2(self) -> float:
        return 2.0 / self.tau2_tilde


@dataclass
class ControlsPrior:
    """Minnesota-style prior moments for the control coefficients."""

    mean: np.ndarray  # (k, H)
    variances: np.ndarray  # (k,) diagonal prior variances
    kappa_own: float = 0.04
    kappa_cross: float = 0.0016
    kappa_det: float = 100.0

    def __post_init__(self) -> None:
        self.mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        self.variances = np.asarray(self.variances, dtype=float).reshape(-1)
        if np.any(self.variances <= 0):
            raise SULPError("control prior variances must be strictly positive")


@dataclass
class CovPrior:
    """Inverse-Wishart prior for the cross-horizon covariance."""

    s0: float
    scale: np.ndarray  # (H, H) SPD

    def __post_init__(self) -> None:
        self.scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        if self.scale.shape[0] != self.scale.shape[1]:
            raise SULPError("covariance prior scale must be square")
        linalg.cholesky(self.scale, lower=True)  # SPD check


@dataclass
class MeasurementPrior:
    """Priors for the instrument equations: loading, controls, error variance."""

    phi_mean: float = 1.0
    phi_var: float = 1.0
    phi_positive: bool = True
    delta_var: float = 10.0
    a_sigma_nu: float = 3.0
    b_sigma_nu: float = 3.0
    s0_nu: float | None = None  # defaults to n_x + 5 at sampler setup
    scale_nu: np.ndarray | None = None  # defaults to 2 * b_sigma_nu * I

    def __post_init__(self) -> None:
        if self.phi_var <= 0 or self.delta_var <= 0:
            raise SULPError("measurement prior variances must be positive")
        if self.a_sigma_nu <= 0 or self.b_sigma_nu <= 0:
            raise SULPError("inverse-gamma hyperparameters must be positive")


@dataclass
class SVPrior:
    """Weakly informative priors for the log-volatility law of motion."""

    rho_mean: float = 0.9
    rho_var: float = 0.04
    a_vol: float = 3.0
    b_vol: float = 0.06


@dataclass
class HyperParams:
    """Bundle of every tuning constant, with the recommended defaults."""

    kernel: GPKernelParams
    ng: NGParams
    cov: CovPrior
    s_scale: float = 1.0
    kappa_own: float = 0.04
    kappa_cross: float = 0.0016
    kappa_det: float = 100.0
    measurement: MeasurementPrior = field(default_factory=MeasurementPrior)
    sv: SVPrior = field(default_factory=SVPrior)
    flat_prior_variance: float | None = None  # set to use a fixed flat V_beta


def default_hyperparameters(H: int, s_scale: float = 1.0) -> HyperParams:
    """Recommended defaults for a system with H horizon equations."""
    if H < 1:
        raise SULPError("H must be >= 1")
    s0 = H + 2
    scale = s_scale / (s0 - H - 1) * np.eye(H)
    return HyperParams(
        kernel=GPKernelParams(),
        ng=NGParams(lambda2=np.ones(H)),
        cov=CovPrior(s0=s0, scale=scale),
        s_scale=s_scale,
    )


def gp_kernel(
    H: int, xi: float, varsigma: float
) -> tuple[np.ndarray, np.ndarray]:
    """Kernel matrix over horizons 1..H and a jittered Cholesky factor.

    Entry (i, j) is (d_i d_j)^(varsigma/2) * exp(-xi (i-j)^2 / 2) with
    d_i = (H + 1 - i) / H, so the diagonal decays toward zero at long
    horizons once varsigma > 0.
    """
    if H < 1:
        raise SULPError("H must be >= 1")
    if xi <= 0 or varsigma < 0:
        raise SULPError("require xi > 0 and varsigma >= 0")
    idx = np.arange(1, H + 1, dtype=float)
    d = (H + 1.0 - idx) / H
    base = np.exp(-0.5 * xi * (idx[:, None] - idx[None, :]) ** 2)
    scale = d ** (varsigma / 2.0)
    K = scale[:, None] * base * scale[None, :]
    L = chol_with_jitter(K, label=f"xi={xi:g}, varsigma={varsigma:g}")
    return K, L


def chol_with_jitter(matrix: np.ndarray, label: str = "") -> np.ndarray:
    """Lower Cholesky factor, escalating a trace-scaled diagonal jitter.

    The ladder starts at 1e-10 * tr(K)/H and multiplies by 10 up to
    1e-6 * tr(K)/H before giving up.
    """
    H = matrix.shape[0]
    base = max(np.trace(matrix) / H, np.finfo(float).tiny)
    jitter = 0.0
    for _ in range(6):
        try:
            return linalg.cholesky(matrix + jitter * np.eye(H), lower=True)
        except linalg.LinAlgError:
            jitter = 1e-10 * base if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-6 * base * 1.0001:
                break
    raise KernelNotPDError(f"kernel not positive definite after jitter ({label})")


def minnesota_controls_prior(
    z_labels: list[tuple],
    H: int,
    target: str,
    kappa_own: float = 0.04,
    kappa_cross: float = 0.0016,
    kappa_det: float = 100.0,
    levels: bool = False,
) -> ControlsPrior:
    """Lag-decaying prior variances with an optional unit mean on the first own lag.

    Own lags of the target get kappa_own / p^2 at lag p, other lags
    kappa_cross / p^2, and deterministic or contemporaneous terms kappa_det.
    The prior mean is 1 on the first own lag when the target is modeled in
    levels and zero everywhere otherwise.
    """
    if min(kappa_own, kappa_cross, kappa_det) <= 0:
        raise SULPError("tightness hyperparameters must be positive")
    k = len(z_labels)
    variances = np.empty(k)
    mean = np.zeros((k, H))
    for row, label in enumerate(z_labels):
        kind = label[0]
        if kind in ("const", "trend", "contemp"):
            variances[row] = kappa_det
        elif kind == "lag":
            _, name, p = label
            own = name == target
            variances[row] = (kappa_own if own else kappa_cross) / p**2
            if levels and own and p == 1:
                mean[row, :] = 1.0
        else:
            raise SULPError(f"unknown control label {label!r}")
    return ControlsPrior(
        mean=mean,
        variances=variances,
        kappa_own=kappa_own,
        kappa_cross=kappa_cross,
        kappa_det=kappa_det,
    )


def ng_prior_variance(ng: NGParams) -> np.ndarray:
    """Elementwise prior variances tau^2 * lambda_h^2."""
    return ng.tau2 * ng.lambda2
