"""Synthetic data generators and their exact impulse responses.

The main process is a VARMA whose moving-average weight shrinks with the
sample size; with the MA weight at zero it collapses to a pure VAR. True
responses come from the companion-form matrix powers, so Monte Carlo scoring
never depends on simulation noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from sulp.errors import InstabilityError, SULPError

_DIVERGENCE_GUARD = 1e8


@dataclass
class VARMAParams:
    """Coefficients of the simulated process."""

    phi: np.ndarray  # (P, n, n) autoregressive matrices
    impact: np.ndarray  # (n, n) structural impact matrix
    ma: np.ndarray  # (J, n, n) moving-average matrices
    alpha: float = 0.0
    pi: float = 0.5
    variable_names: list[str] | None = None
    target_index: int = 0
    shock_index: int = 0

    def __post_init__(self) -> None:
        self.phi = np.asarray(self.phi, dtype=float)
        self.impact = np.asarray(self.impact, dtype=float)
        self.ma = np.asarray(self.ma, dtype=float)
        if self.phi.ndim != 3 or self.phi.shape[1] != self.phi.shape[2]:
            raise SULPError("phi must be (P, n, n)")
        if self.alpha < 0:
            raise SULPError("alpha must be nonnegative")
        radius = companion_spectral_radius(self.phi)
        if radius >= 1.0:
            raise InstabilityError(f"companion spectral radius {radius:.4f} >= 1")
        if abs(np.linalg.det(self.impact)) < 1e-12:
            raise SULPError("impact matrix must be invertible")

    @property
    def n_vars(self) -> int:
        return self.phi.shape[1]

    @property
    def n_lags(self) -> int:
        return self.phi.shape[0]

    @property
    def n_ma(self) -> int:
        return self.ma.shape[0]


@dataclass
class TrueIRF:
    """Exact dynamic responses of one variable to one structural shock."""

    beta_star: np.ndarray  # (H,) responses at horizons 0..H-1
    target_index: int
    shock_index: int


def companion_matrix(phi: np.ndarray) -> np.ndarray:
    P, n, _ = phi.shape
    F = np.zeros((n * P, n * P))
    F[:n] = np.concatenate(list(phi), axis=1)
    if P > 1:
        F[n:, : n * (P - 1)] = np.eye(n * (P - 1))
    return F


def companion_spectral_radius(phi: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(phi)))))


def simulate_varma(
    params: VARMAParams, T: int, rng: np.random.Generator, burn: int = 1000
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate T observations (after burn-in) and the structural shock series.

    Returns the (T, n) data matrix and the (T,) series of the structural
    shock of interest, treated as observed in the Monte Carlo experiments.
    """
    n, P, J = params.n_vars, params.n_lags, params.n_ma
    total = T + burn
    eps = rng.standard_normal((total + J, n))
    ma_weight = params.alpha * T ** (-params.pi)
    impact_eps = eps @ params.impact.T  # H eps_t rows
    ma_terms = np.zeros((total, n))
    if params.alpha != 0.0:
        for j in range(1, J + 1):
            ma_terms += impact_eps[J - j : J - j + total] @ params.ma[j - 1].T
        ma_terms *= ma_weight
    w = np.zeros((total + P, n))
    for t in range(total):
        row = impact_eps[J + t] + ma_terms[t]
        for p in range(1, P + 1):
            row = row + params.phi[p - 1] @ w[P + t - p]
        if np.max(np.abs(row)) > _DIVERGENCE_GUARD:
            raise InstabilityError("simulated path diverged")
        w[P + t] = row
    data = w[P + burn :]
    shocks = eps[J + burn :, params.shock_index]
    return data, shocks


def true_irf(
    params: VARMAParams,
    T: int,
    target: int | None = None,
    shock: int | None = None,
    horizons: int = 16,
) -> TrueIRF:
    """Companion-form responses, including the sample-size-scaled MA part."""
    i = params.target_index if target is None else target
    j = params.shock_index if shock is None else shock
    n, P = params.n_vars, params.n_lags
    F = companion_matrix(params.phi)
    ma_weight = params.alpha * T ** (-params.pi)
    top = np.zeros((n, n * P))
    top[:, :n] = np.eye(n)

    beta = np.empty(horizons + 1)
    beta[0] = params.impact[i, j]
    F_pow = np.eye(n * P)
    tops = [top @ F_pow]  # M' F^l restricted to the observed block
    for _ in range(horizons):
        F_pow = F_pow @ F
        tops.append(top[:, :] @ F_pow)
    for h in range(1, horizons + 1):
        response = tops[h][:, :n] @ params.impact
        if params.alpha != 0.0:
            for k in range(1, h + 1):
                if k <= params.n_ma:
                    response = response + ma_weight * (
                        tops[h - k][:, :n] @ params.ma[k - 1] @ params.impact
                    )
        beta[h] = response[i, j]
    return TrueIRF(beta_star=beta, target_index=i, shock_index=j)


def simulate_ar1(
    rho: float, T: int, rng: np.random.Generator, burn: int = 200
) -> np.ndarray:
    """AR(1) path with standard-normal shocks; dynamic multiplier rho^(h+1)."""
    if abs(rho) > 1:
        raise SULPError("|rho| must be <= 1")
    eps = rng.standard_normal(T + burn)
    w = np.empty(T + burn)
    prev = 0.0
    for t in range(T + burn):
        prev = rho * prev + eps[t]
        w[t] = prev
    return w[burn:]


def load_calibration(path: str | Path | None = None, preset: str = "varma7") -> VARMAParams:
    """Read VARMA coefficients from a JSON calibration file.

    Without a path, loads one of the shipped presets: "varma7" (the default
    7-variable system) or "varma3" (a small system for fast checks).
    """
    if path is None:
        ref = resources.files("sulp").joinpath(f"calibrations/{preset}.json")
        raw = json.loads(ref.read_text())
    else:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such calibration file: {path}")
        raw = json.loads(path.read_text())
    return params_from_dict(raw)


def params_from_dict(raw: dict) -> VARMAParams:
    required = {"phi", "impact", "ma", "alpha", "pi"}
    missing = required - set(raw)
    if missing:
        raise SULPError(f"calibration file missing keys: {sorted(missing)}")
    return VARMAParams(
        phi=np.asarray(raw["phi"], dtype=float),
        impact=np.asarray(raw["impact"], dtype=float),
        ma=np.asarray(raw["ma"], dtype=float),
        alpha=float(raw["alpha"]),
        pi=float(raw["pi"]),
        variable_names=raw.get("variable_names"),
        target_index=int(raw.get("target_index", 0)),
        shock_index=int(raw.get("shock_index", 0)),
    )


def params_to_dict(params: VARMAParams) -> dict:
    return {
        "phi": params.phi.tolist(),
        "impact": params.impact.tolist(),
        "ma": params.ma.tolist(),
        "alpha": params.alpha,
        "pi": params.pi,
        "variable_names": params.variable_names,
        "target_index": params.target_index,
        "shock_index": params.shock_index,
    }
