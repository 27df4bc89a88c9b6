"""Stochastic volatility for the latent shocks.

The log variance follows a zero-mean AR(1). Conditional on the shock path,
log(x_t^2) equals the log variance plus a log chi-square(1) disturbance,
which is replaced by the standard 7-component Gaussian mixture so the path
can be drawn in one block with a forward filter, backward sampler.
"""

from __future__ import annotations

import math

import numpy as np

from sulp.errors import NumericalError
from sulp.priors import SVPrior
from sulp.randutil import sample_truncated_normal

# 7-component mixture approximation to log chi-square(1): weights, means
# (offset so the mixture mean matches E[log chi2_1] = -1.2704), variances.
MIX_PROB = np.array([0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750])
MIX_MEAN = (
    np.array([-10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819])
    - 1.2704
)
MIX_VAR = np.array([5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261])

_LOG_FLOOR = -700.0  # keeps log(x^2) finite when a shock draw underflows


def draw_sv_block(
    x: np.ndarray,
    logvol: np.ndarray,
    rho: float,
    vol_var: float,
    prior: SVPrior,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, float]:
    """One sweep over (log-variance path, persistence, innovation variance)."""
    obs = np.log(np.maximum(x * x, math.exp(_LOG_FLOOR)))
    comp = _draw_mixture_indicators(obs, logvol, rng)
    h = _ffbs(obs - MIX_MEAN[comp], MIX_VAR[comp], rho, vol_var, rng)
    rho_new = _draw_persistence(h, vol_var, prior, rng)
    vol_new = _draw_vol_of_vol(h, rho_new, prior, rng)
    return h, rho_new, vol_new


def _draw_mixture_indicators(
    obs: np.ndarray, h: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    resid = obs[:, None] - h[:, None] - MIX_MEAN[None, :]
    logp = (
        np.log(MIX_PROB)[None, :]
        - 0.5 * np.log(MIX_VAR)[None, :]
        - 0.5 * resid**2 / MIX_VAR[None, :]
    )
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random(obs.size)
    return (np.cumsum(p, axis=1) < u[:, None]).sum(axis=1)


def _ffbs(
    y: np.ndarray,
    obs_var: np.ndarray,
    rho: float,
    vol_var: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Forward filter, backward sample for h_t = rho h_{t-1} + N(0, vol_var)."""
    T = y.size
    a = np.empty(T)  # filtered means
    p = np.empty(T)  # filtered variances
    pred_var0 = vol_var / max(1.0 - rho * rho, 1e-10)  # stationary start
    m_pred, v_pred = 0.0, pred_var0
    for t in range(T):
        denom = v_pred + obs_var[t]
        if denom <= 0 or not math.isfinite(denom):
            raise NumericalError("volatility filter variance underflow")
        gain = v_pred / denom
        a[t] = m_pred + gain * (y[t] - m_pred)
        p[t] = v_pred * (1.0 - gain)
        m_pred = rho * a[t]
        v_pred = rho * rho * p[t] + vol_var
    h = np.empty(T)
    h[-1] = a[-1] + math.sqrt(p[-1]) * rng.standard_normal()
    for t in range(T - 2, -1, -1):
        denom = rho * rho * p[t] + vol_var
        gain = p[t] * rho / denom
        mean = a[t] + gain * (h[t + 1] - rho * a[t])
        var = p[t] * (1.0 - gain * rho)
        h[t] = mean + math.sqrt(max(var, 0.0)) * rng.standard_normal()
    return h


def _draw_persistence(
    h: np.ndarray, vol_var: float, prior: SVPrior, rng: np.random.Generator
) -> float:
    lagged = h[:-1]
    lead = h[1:]
    prec = float(lagged @ lagged) / vol_var + 1.0 / prior.rho_var
    mean = (float(lagged @ lead) / vol_var + prior.rho_mean / prior.rho_var) / prec
    return sample_truncated_normal(mean, 1.0 / prec, -1.0, rng, upper=1.0)


def _draw_vol_of_vol(
    h: np.ndarray, rho: float, prior: SVPrior, rng: np.random.Generator
) -> float:
    resid = h[1:] - rho * h[:-1]
    # the stationary initial state contributes one more quadratic term
    shape = prior.a_vol + 0.5 * h.size
    rate = prior.b_vol + 0.5 * (float(resid @ resid) + (1.0 - rho * rho) * h[0] ** 2)
    return float(rate / rng.gamma(shape, 1.0))
