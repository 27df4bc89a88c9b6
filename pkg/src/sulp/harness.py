"""Monte Carlo experiment runner: replicate the DGP, run every estimator,
and score coverage, normalized bias, and dispersion per horizon.

Replications are independent across (sample size, MA weight, repetition)
cells through counter-derived RNG substreams, so results do not depend on
scheduling order and removing one cell never changes another. Completed
replications are checkpointed to disk and reruns resume from them.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from sulp.baselines import ols_lp_hac, smooth_lp
from sulp.dataset import DesignSpec, TimeSeriesDataset, build_design, standardize
from sulp.dgp import VARMAParams, load_calibration, simulate_varma, true_irf
from sulp.errors import SULPError
from sulp.power import importance_weights
from sulp.randutil import quantile_weighted
from sulp.sampler import SamplerConfig, run_sampler

KNOWN_ESTIMATORS = ("su-lp", "su-lp-flat", "lp", "lp-smooth")


class NormalizerZeroError(SULPError):
    """The true response path is identically zero; metrics are undefined."""


@dataclass
class MCConfig:
    """Design of one Monte Carlo experiment."""

    n_reps: int = 200
    T_grid: tuple[int, ...] = (250,)
    alpha_grid: tuple[float, ...] = (2.0,)
    horizons: int = 16
    estimators: tuple[str, ...] = KNOWN_ESTIMATORS
    level: float = 0.90
    c_grid: tuple[float, ...] | None = None
    seed: int = 0
    calibration: str | None = None  # shipped preset name or a file path
    lags: int = 5
    n_draws: int = 12_000
    burn_in: int = 3_000
    thin: int = 3
    checkpoint_dir: str | None = None
    workers: int = 1
    keep_chains: bool = False

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise SULPError("n_reps must be >= 1")
        if not (0.0 < self.level < 1.0):
            raise SULPError("coverage level must be in (0, 1)")
        unknown = set(self.estimators) - set(KNOWN_ESTIMATORS)
        if unknown:
            raise SULPError(f"unknown estimators: {sorted(unknown)}")
        if self.c_grid is not None:
            self.keep_chains = True


@dataclass
class MCResult:
    """Per-cell point estimates, interval bounds, and aggregate metrics."""

    config: MCConfig
    beta_star: dict[tuple[int, float], np.ndarray]
    estimates: dict[tuple[str, int, float], np.ndarray]  # (n_reps, H), NaN on failure
    lower: dict[tuple[str, int, float], np.ndarray]
    upper: dict[tuple[str, int, float], np.ndarray]
    failures: dict[tuple[str, int, float], int]
    runtime_seconds: float = 0.0
    chains: dict[tuple[int, float], list[dict]] = field(default_factory=dict)

    def cells(self) -> list[tuple[str, int, float]]:
        return sorted(self.estimates, key=lambda c: (c[0], c[1], c[2]))

    def metrics_rows(self) -> list[dict]:
        """Tidy rows: one per (estimator, T, alpha, horizon, metric)."""
        rows: list[dict] = []
        for key in self.cells():
            est, T, alpha = key
            star = self.beta_star[(T, alpha)]
            cov = coverage(
                np.stack([self.lower[key], self.upper[key]], axis=-1), star
            )
            stats = normalized_bias_std(self.estimates[key], star)
            n_ok = int(np.sum(~np.isnan(self.estimates[key][:, 0])))
            for h in range(star.size):
                base = {
                    "estimator": est,
                    "T": T,
                    "alpha": alpha,
                    "h": h,
                    "n_reps": n_ok,
                    "n_fail": self.failures[key],
                }
                rows.append({**base, "metric": "coverage", "value": cov[h]})
                for name, values in stats.items():
                    rows.append({**base, "metric": name, "value": values[h]})
        return rows


def coverage(intervals: np.ndarray, beta_star: np.ndarray) -> np.ndarray:
    """Fraction of replications whose closed interval contains the truth."""
    lower = intervals[..., 0]
    upper = intervals[..., 1]
    hit = (lower <= beta_star[None, :]) & (beta_star[None, :] <= upper)
    ok = ~np.isnan(lower[:, 0])
    if not ok.any():
        return np.full(beta_star.size, np.nan)
    return hit[ok].mean(axis=0)


def normalized_bias_std(
    estimates: np.ndarray, beta_star: np.ndarray
) -> dict[str, np.ndarray]:
    """Bias and dispersion per horizon, scaled by the RMS of the true path."""
    norm = float(np.sqrt(beta_star @ beta_star / max(beta_star.size - 1, 1)))
    if norm == 0.0:
        raise NormalizerZeroError("true response path is identically zero")
    ok = ~np.isnan(estimates[:, 0])
    est = estimates[ok]
    if est.shape[0] < 2:
        raise SULPError("need at least two successful replications")
    abs_err = np.abs(est - beta_star[None, :])
    return {
        "bias_mean": np.abs(est.mean(axis=0) - beta_star) / norm,
        "bias_median": np.median(abs_err, axis=0) / norm,
        "bias_q25": np.quantile(abs_err, 0.25, axis=0) / norm,
        "bias_q75": np.quantile(abs_err, 0.75, axis=0) / norm,
        "std": est.std(axis=0, ddof=1) / norm,
    }


def run_monte_carlo(config: MCConfig) -> MCResult:
    """Execute the full experiment, resuming from any checkpointed cells."""
    import time

    start = time.time()
    base_params = _load_params(config)
    result = MCResult(
        config=config,
        beta_star={},
        estimates={},
        lower={},
        upper={},
        failures={},
    )
    H = config.horizons + 1
    for T in config.T_grid:
        for alpha in config.alpha_grid:
            params = replace(base_params, alpha=float(alpha))
            result.beta_star[(T, alpha)] = true_irf(
                params, T, horizons=config.horizons
            ).beta_star
            reps = _run_cell(config, params, T, float(alpha))
            if config.keep_chains:
                result.chains[(T, alpha)] = [r.get("chain") for r in reps]
            for est in config.estimators:
                key = (est, T, float(alpha))
                result.estimates[key] = np.full((config.n_reps, H), np.nan)
                result.lower[key] = np.full((config.n_reps, H), np.nan)
                result.upper[key] = np.full((config.n_reps, H), np.nan)
                fails = 0
                for r, rep in enumerate(reps):
                    got = rep["estimators"].get(est)
                    if got is None:
                        fails += 1
                        continue
                    result.estimates[key][r] = got["point"]
                    result.lower[key][r] = got["lower"]
                    result.upper[key][r] = got["upper"]
                result.failures[key] = fails
    result.runtime_seconds = time.time() - start
    return result


def coarsening_sweep(
    chains: list[dict],
    c_grid: tuple[float, ...],
    beta_star: np.ndarray,
    level: float = 0.90,
) -> dict[float, dict]:
    """Re-score stored chains under power-posterior weights for each c."""
    H = beta_star.size
    out: dict[float, dict] = {}
    for c in c_grid:
        points = np.full((len(chains), H), np.nan)
        lowers = np.full((len(chains), H), np.nan)
        uppers = np.full((len(chains), H), np.nan)
        ess = np.full(len(chains), np.nan)
        for r, chain in enumerate(chains):
            if chain is None:
                continue
            w = importance_weights(chain["loglik"], c)
            summary = summarize_weighted(chain["beta"], w, level)
            points[r] = summary["point"]
            lowers[r] = summary["lower"]
            uppers[r] = summary["upper"]
            ess[r] = 1.0 / float(np.sum(w * w))
        cell = {
            "coverage": coverage(np.stack([lowers, uppers], axis=-1), beta_star),
            "ess_min": float(np.nanmin(ess)),
            "ess_median": float(np.nanmedian(ess)),
        }
        cell.update(normalized_bias_std(points, beta_star))
        out[c] = cell
    return out


def summarize_weighted(
    beta_draws: np.ndarray, weights: np.ndarray, level: float
) -> dict[str, np.ndarray]:
    """Weighted posterior mean and equal-tailed interval per horizon."""
    q_lo, q_hi = 0.5 - level / 2.0, 0.5 + level / 2.0
    H = beta_draws.shape[1]
    point = np.empty(H)
    lower = np.empty(H)
    upper = np.empty(H)
    for h in range(H):
        col = beta_draws[:, h]
        point[h] = float(np.sum(col * weights))
        lower[h], upper[h] = quantile_weighted(col, [q_lo, q_hi], weights)
    return {"point": point, "lower": lower, "upper": upper}


# ---------------------------------------------------------------------------
# per-replication machinery


def _load_params(config: MCConfig) -> VARMAParams:
    cal = config.calibration
    if cal is None:
        return load_calibration(preset="varma7")
    if cal in ("varma7", "varma3"):
        return load_calibration(preset=cal)
    return load_calibration(path=cal)


def _run_cell(
    config: MCConfig, params: VARMAParams, T: int, alpha: float
) -> list[dict]:
    jobs = [(config, params, T, alpha, rep) for rep in range(config.n_reps)]
    pending = [j for j in jobs if _checkpoint_load(config, T, alpha, j[4]) is None]
    if pending:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for payload, rep_result in zip(
                    pending, pool.map(_run_one_rep, pending, chunksize=1)
                ):
                    _checkpoint_save(config, T, alpha, payload[4], rep_result)
        else:
            for payload in pending:
                _checkpoint_save(config, T, alpha, payload[4], _run_one_rep(payload))
    out = []
    for rep in range(config.n_reps):
        got = _checkpoint_load(config, T, alpha, rep)
        if got is None:
            raise SULPError(f"replication {rep} missing after run")
        out.append(got)
    return out


_MEMORY_CHECKPOINTS: dict[tuple, dict] = {}


def _checkpoint_path(config: MCConfig, T: int, alpha: float, rep: int) -> Path | None:
    if config.checkpoint_dir is None:
        return None
    cell = f"T{T}_alpha{alpha:g}"
    return Path(config.checkpoint_dir) / cell / f"rep{rep:05d}.npz"


def _checkpoint_save(
    config: MCConfig, T: int, alpha: float, rep: int, rep_result: dict
) -> None:
    path = _checkpoint_path(config, T, alpha, rep)
    if path is None:
        _MEMORY_CHECKPOINTS[(id(config), T, alpha, rep)] = rep_result
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    flat: dict[str, np.ndarray] = {}
    for est, got in rep_result["estimators"].items():
        if got is None:
            flat[f"fail__{est}"] = np.array(1)
            continue
        for part in ("point", "lower", "upper"):
            flat[f"{est}__{part}"] = got[part]
    chain = rep_result.get("chain")
    if chain is not None:
        flat["chain__beta"] = chain["beta"]
        flat["chain__loglik"] = chain["loglik"]
    tmp = path.with_suffix(".tmp.npz")
    np.savez_compressed(tmp, **flat)
    os.replace(tmp, path)


def _checkpoint_load(config: MCConfig, T: int, alpha: float, rep: int) -> dict | None:
    path = _checkpoint_path(config, T, alpha, rep)
    if path is None:
        return _MEMORY_CHECKPOINTS.get((id(config), T, alpha, rep))
    if not path.exists():
        return None
    with np.load(path) as data:
        rep_result: dict = {"estimators": {}}
        chain: dict = {}
        for key in data.files:
            if key.startswith("fail__"):
                rep_result["estimators"][key[6:]] = None
            elif key.startswith("chain__"):
                chain[key[7:]] = data[key]
            else:
                est, part = key.rsplit("__", 1)
                rep_result["estimators"].setdefault(est, {})[part] = data[key]
        if chain:
            rep_result["chain"] = chain
    return rep_result


def _run_one_rep(payload: tuple) -> dict:
    config, params, T, alpha, rep = payload
    alpha_key = int(round(alpha * 1000))
    sim_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(T, alpha_key, rep, 0))
    )
    data, shocks = simulate_varma(params, T, sim_rng)
    names = params.variable_names or [f"v{i}" for i in range(params.n_vars)]
    dataset = TimeSeriesDataset(
        names=names + ["shock"],
        values=np.column_stack([data, shocks]),
        time_index=[str(i) for i in range(T)],
    )
    std, scaling = standardize(dataset)
    target = names[params.target_index]
    spec = DesignSpec(
        target=target,
        shocks=["shock"],
        lagged=names + ["shock"],
        lags=config.lags,
        horizons=config.horizons,
        intercept=True,
    )
    system = build_design(std, spec)
    rescale = scaling.std(target) / scaling.std("shock")

    out: dict = {"estimators": {}}
    for est in config.estimators:
        try:
            if est == "lp":
                res = ols_lp_hac(system)
                ci = res.ci(config.level)
                got = {
                    "point": res.beta_hat * rescale,
                    "lower": ci[:, 0] * rescale,
                    "upper": ci[:, 1] * rescale,
                }
            elif est == "lp-smooth":
                res = smooth_lp(system)
                ci = res.ci(config.level)
                got = {
                    "point": res.beta_hat * rescale,
                    "lower": ci[:, 0] * rescale,
                    "upper": ci[:, 1] * rescale,
                }
            else:
                sampler_rng = np.random.default_rng(
                    np.random.SeedSequence(
                        config.seed,
                        spawn_key=(T, alpha_key, rep, 1 if est == "su-lp" else 2),
                    )
                )
                scfg = SamplerConfig(
                    n_draws=config.n_draws,
                    burn_in=config.burn_in,
                    thin=config.thin,
                    flat_prior=(est == "su-lp-flat"),
                    store_gamma=False,
                    store_latent=False,
                )
                chain = run_sampler(system, config=scfg, rng=sampler_rng)
                beta = chain.draws["beta"][:, 0, :] * rescale
                w = importance_weights(chain.loglik, 1.0)
                got = summarize_weighted(beta, w, config.level)
                if config.keep_chains and est == "su-lp":
                    out["chain"] = {"beta": beta, "loglik": chain.loglik.copy()}
            out["estimators"][est] = got
        except Exception:
            out["estimators"][est] = None
    return out
