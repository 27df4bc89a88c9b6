"""Small sampling utilities shared by the Gibbs steps."""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg, special

from sulp.errors import NumericalError


def sample_mvn_precision(
    precision: np.ndarray, linear: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw from N(P^-1 b, P^-1) given precision P and linear term b."""
    try:
        cf = linalg.cho_factor(precision, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError("posterior precision is not positive definite") from exc
    mean = linalg.cho_solve(cf, linear, check_finite=False)
    noise = linalg.solve_triangular(
        cf[0],
        rng.standard_normal(precision.shape[0]),
        lower=True,
        trans="T",
        check_finite=False,
    )
    return mean + noise


def sample_mvn_cov(
    mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator, jitter: float = 0.0
) -> np.ndarray:
    """Draw from N(mean, cov); optional diagonal jitter for near-singular cov."""
    H = cov.shape[0]
    mat = cov if jitter == 0.0 else cov + jitter * np.eye(H)
    try:
        L = linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc
    return mean + L @ rng.standard_normal(H)


def sample_inverse_wishart(
    df: float, scale: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw from IW(df, scale) via the Bartlett factorization.

    Requires df > H - 1; the mean scale/(df - H - 1) exists for df > H + 1.
    """
    H = scale.shape[0]
    if df <= H - 1:
        raise ValueError("degrees of freedom too small for inverse Wishart")
    try:
        L = linalg.cholesky(scale, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError("inverse-Wishart scale is not positive definite") from exc
    A = np.tril(rng.standard_normal((H, H)), -1)
    A[np.diag_indices(H)] = np.sqrt(rng.chisquare(df - np.arange(H)))
    # W = C A A' C' ~ Wishart(df, scale^-1) with C = L'^-1; invert triangularly
    M = linalg.solve_triangular(A, L.T, lower=True, check_finite=False)  # M = A^-1 L'
    return M.T @ M


def sample_truncated_normal(
    mean: float, var: float, lower: float, rng: np.random.Generator, upper: float = np.inf
) -> float:
    """Inverse-CDF draw from N(mean, var) restricted to (lower, upper)."""
    sd = math.sqrt(var)
    a = special.ndtr((lower - mean) / sd)
    b = special.ndtr((upper - mean) / sd) if np.isfinite(upper) else 1.0
    if b - a <= 0.0:
        # mass numerically zero inside the interval; clamp to nearest bound
        return float(lower if mean < lower else upper)
    u = a + (b - a) * rng.random()
    u = min(max(u, 1e-15), 1.0 - 1e-15)
    return float(mean + sd * special.ndtri(u))


def truncated_normal_logpdf(
    x: float, mean: float, var: float, lower: float, upper: float
) -> float:
    """Log density of a truncated normal; -inf outside the bounds."""
    if not (lower < x <= upper):
        return -np.inf
    return float(-0.5 * (x - mean) ** 2 / var)  # normalization cancels in MH ratios


def quantile_weighted(
    draws: np.ndarray, q: np.ndarray | list[float], weights: np.ndarray | None = None
) -> np.ndarray:
    """Weighted quantiles with midpoint interpolation.

    With uniform weights this reduces to interpolating at plotting positions
    (i - 1/2)/S, which is the convention used for every chain summary so that
    reweighted results at c = 1 coincide exactly with unweighted ones.
    """
    draws = np.asarray(draws, dtype=float).reshape(-1)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if weights is None:
        w = np.full(draws.size, 1.0 / draws.size)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        w = w / w.sum()
    order = np.argsort(draws, kind="stable")
    xs = draws[order]
    ws = w[order]
    cum = np.cumsum(ws)
    pos = cum - 0.5 * ws
    return np.interp(q, pos, xs, left=xs[0], right=xs[-1])
