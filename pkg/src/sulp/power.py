"""Power-posterior reweighting of a stored chain.

Raising the pseudo-likelihood to c < 1 downweights the data; draws from the
standard posterior are turned into draws from the power posterior by
importance weights proportional to the likelihood to the power (c - 1),
followed by optional multinomial resampling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from sulp.errors import SULPError
from sulp.sampler import Chain

ESS_WARN_FRACTION = 0.01

CANONICAL_C_GRID = tuple(round(0.80 + 0.01 * i, 2) for i in range(21))


@dataclass
class WeightedChain:
    """A chain reweighted toward the power posterior at learning rate c."""

    chain: Chain
    c: float
    weights: np.ndarray
    ess: float

    def __post_init__(self) -> None:
        if not (0.0 < self.c <= 1.0):
            raise SULPError("learning rate c must be in (0, 1]")


def importance_weights(loglik: np.ndarray, c: float) -> np.ndarray:
    """Normalized weights proportional to exp((c - 1) * loglik)."""
    if not (0.0 < c <= 1.0):
        raise SULPError("learning rate c must be in (0, 1]")
    loglik = np.asarray(loglik, dtype=float)
    if np.all(np.isneginf(loglik)):
        raise SULPError("all log likelihoods are -inf; weights undefined")
    a = (c - 1.0) * loglik
    a -= a.max()
    w = np.exp(a)
    return w / w.sum()


def effective_sample_size(weights: np.ndarray) -> float:
    """1 / sum of squared normalized weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def reweight(chain: Chain, c: float) -> WeightedChain:
    """Attach power-posterior weights and their effective sample size."""
    w = importance_weights(chain.loglik, c)
    ess = effective_sample_size(w)
    if ess < ESS_WARN_FRACTION * w.size:
        warnings.warn(
            f"effective sample size {ess:.1f} below {ESS_WARN_FRACTION:.0%} of "
            f"{w.size} draws at c={c}",
            RuntimeWarning,
            stacklevel=2,
        )
    return WeightedChain(chain=chain, c=c, weights=w, ess=ess)


def resample(
    chain: Chain, weights: np.ndarray, n_out: int, rng: np.random.Generator
) -> Chain:
    """Multinomial resampling of the stored draws with the given weights."""
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > 1e-8:
        raise SULPError("weights must be normalized")
    idx = rng.choice(w.size, size=n_out, replace=True, p=w)
    draws = {key: value[idx] for key, value in chain.draws.items()}
    return Chain(
        draws=draws,
        config=chain.config,
        acceptance=dict(chain.acceptance),
        target=chain.target,
        shock_names=list(chain.shock_names),
    )
