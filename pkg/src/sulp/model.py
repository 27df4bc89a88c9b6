"""The stacked projection system and its joint pseudo-likelihood.

One time-t observation contributes a Gaussian density for the whole vector of
horizon responses with a full cross-horizon covariance; when shocks are
instrumented, the measurement equations contribute further Gaussian terms.
The per-draw value of this function is what the power-posterior reweighting
consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from sulp.errors import NumericalError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class SULPSystem:
    """Stacked design: responses across horizons plus shock and control blocks.

    ``y`` may contain NaN at positions listed in ``missing`` until the sampler
    imputes them; every other block must be complete.
    """

    y: np.ndarray  # (T, H) responses, NaN at missing entries
    z: np.ndarray  # (T, k) controls
    x_obs: np.ndarray | None = None  # (T, n_x) observed shocks
    m: np.ndarray | None = None  # (T, n_x * n_m) instruments
    missing: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=int))
    z_labels: list[tuple] = field(default_factory=list)
    target: str = "w"
    shock_names: list[str] = field(default_factory=lambda: ["x"])
    instrument_names: list[list[str]] | None = None
    n_instruments_per_shock: int = 0
    long_differences: bool = False
    sv: bool = False
    correlated_measurement_errors: bool = False

    def __post_init__(self) -> None:
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.z = np.asarray(self.z, dtype=float).reshape(self.y.shape[0], -1)
        self.missing = np.asarray(self.missing, dtype=int).reshape(-1, 2)

    @property
    def n_origins(self) -> int:
        return self.y.shape[0]

    @property
    def n_horizon_eqs(self) -> int:
        return self.y.shape[1]

    @property
    def n_controls(self) -> int:
        return self.z.shape[1]

    @property
    def n_shocks(self) -> int:
        return len(self.shock_names)

    @property
    def latent_shocks(self) -> bool:
        return self.x_obs is None

    def missing_by_row(self) -> list[tuple[int, np.ndarray, np.ndarray]]:
        """Per affected origin row: (t, missing columns, observed columns).

        Computed once and cached; the sampler's imputation step walks this
        every sweep.
        """
        cached = getattr(self, "_missing_rows", None)
        if cached is not None:
            return cached
        rows: list[tuple[int, np.ndarray, np.ndarray]] = []
        if self.missing.size:
            all_cols = np.arange(self.n_horizon_eqs)
            for t in np.unique(self.missing[:, 0]):
                cols = np.sort(self.missing[self.missing[:, 0] == t, 1])
                obs = np.setdiff1d(all_cols, cols, assume_unique=True)
                rows.append((int(t), cols, obs))
        self._missing_rows = rows
        return rows


@dataclass
class ChainState:
    """One full parameter configuration visited by the sampler."""

    beta: np.ndarray  # (n_x, H) impulse responses
    gamma: np.ndarray  # (k, H) control coefficients
    sigma_u: np.ndarray  # (H, H) cross-horizon covariance
    mu_beta: np.ndarray  # (n_x, H) smooth prior means
    xi: np.ndarray  # (n_x,) kernel inverse length-scales
    varsigma: np.ndarray  # (n_x,) kernel decay exponents
    tau2_tilde: np.ndarray  # (n_x,) global shrinkage states (tau^2 = 2 / tau2_tilde)
    lambda2: np.ndarray  # (n_x, H) local prior variances, global scale absorbed
    x: np.ndarray  # (T, n_x) shock values (observed copy or latent draw)
    y_filled: np.ndarray  # (T, H) responses with current imputations
    phi: np.ndarray | None = None  # (n_x, n_m) instrument loadings
    delta: np.ndarray | None = None  # (n_x, n_m, k) instrument controls
    sigma_nu: np.ndarray | None = None  # (n_x, n_m) measurement variances
    sigma_nu_full: np.ndarray | None = None  # (n_x, n_x) when errors correlate
    logvol: np.ndarray | None = None  # (T, n_x) log shock variances
    rho_x: np.ndarray | None = None  # (n_x,) volatility persistence
    vol_of_vol: np.ndarray | None = None  # (n_x,) volatility innovation variances
    log_pseudo_lik: float = np.nan

    def v_beta(self) -> np.ndarray:
        """Response prior variances, shaped (n_x, H).

        ``lambda2`` stores the local variances with the global scale already
        absorbed (the collapsed form the conditional posteriors are written
        in): a local draw given the global state is gamma with rate
        theta * tau2_tilde / 2, so on average it equals tau^2 * lambda_h^2 of
        the two-layer hierarchy.
        """
        return self.lambda2.copy()

    def shock_variances(self) -> np.ndarray:
        """(T, n_x) conditional shock variances; ones when homoskedastic."""
        if self.logvol is None:
            return np.ones_like(self.x)
        return np.exp(self.logvol)


def residuals(system: SULPSystem, state: ChainState) -> np.ndarray:
    """U = Y - X B - Z Gamma over the imputed-complete panel."""
    u = state.y_filled - state.x @ state.beta
    if system.n_controls:
        u -= system.z @ state.gamma
    return u


def log_pseudo_likelihood(system: SULPSystem, state: ChainState) -> float:
    """Sum of per-origin joint Gaussian log densities (plus measurement terms).

    Uses a single Cholesky factorization of the cross-horizon covariance;
    raises on a non-PD covariance. Instrumented systems add the measurement
    equations' Gaussian terms so the stored value matches the weight needed
    by the power posterior.
    """
    u = residuals(system, state)
    value = _gaussian_panel_loglik(u, state.sigma_u)
    if system.m is not None:
        value += _measurement_loglik(system, state)
    return value


def _gaussian_panel_loglik(resid: np.ndarray, cov: np.ndarray) -> float:
    T, H = resid.shape
    try:
        cf = linalg.cho_factor(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("covariance matrix is not positive definite") from exc
    half_logdet = float(np.sum(np.log(np.diag(cf[0]))))
    w = linalg.solve_triangular(cf[0], resid.T, lower=True)
    quad = float(np.sum(w * w))
    return -0.5 * T * H * LOG_2PI - T * half_logdet - 0.5 * quad


def measurement_residuals(system: SULPSystem, state: ChainState) -> np.ndarray:
    """(T, n_x * n_m) instrument residuals m - phi x - z delta."""
    n_m = system.n_instruments_per_shock
    out = np.empty_like(system.m)
    for i in range(system.n_shocks):
        for j in range(n_m):
            col = i * n_m + j
            fitted = state.phi[i, j] * state.x[:, i]
            if system.n_controls:
                fitted = fitted + system.z @ state.delta[i, j]
            out[:, col] = system.m[:, col] - fitted
    return out


def _measurement_loglik(system: SULPSystem, state: ChainState) -> float:
    nu = measurement_residuals(system, state)
    if state.sigma_nu_full is not None:
        return _gaussian_panel_loglik(nu, state.sigma_nu_full)
    var = state.sigma_nu.reshape(-1)
    T = nu.shape[0]
    return float(
        -0.5 * T * nu.shape[1] * LOG_2PI
        - 0.5 * T * np.sum(np.log(var))
        - 0.5 * np.sum(nu * nu / var)
    )


def relevance_statistic(
    state: ChainState, t: int, shock: int = 0, instrument: int = 0
) -> float:
    """Shock-signal share of instrument variance at time t, in [0, 1]."""
    if state.phi is None or state.sigma_nu is None:
        raise NumericalError("relevance statistic requires instrument modeling")
    sigma_x2 = state.shock_variances()[t, shock]
    signal = state.phi[shock, instrument] ** 2 * sigma_x2
    return float(signal / (signal + state.sigma_nu[shock, instrument]))
