"""Command-line entry point: estimate, simulate, montecarlo, reweight.

Every command is a pure function of (config file, seed, input files); result
files carry a config hash and no timestamps, so fixed-seed reruns are
byte-identical. Exit codes: 0 success, 2 config error, 3 numerical failure,
4 partial Monte Carlo failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from sulp import chainio
from sulp.config import ConfigError, load_config, require, section
from sulp.dataset import (
    DesignSpec,
    TimeSeriesDataset,
    build_design,
    design_origin_labels,
    load_csv,
    standardize,
)
from sulp.dgp import load_calibration, simulate_varma, true_irf
from sulp.errors import SULPError
from sulp.harness import MCConfig, coarsening_sweep, run_monte_carlo
from sulp.model import SULPSystem
from sulp.power import effective_sample_size, importance_weights
from sulp.priors import HyperParams, default_hyperparameters
from sulp.sampler import Chain, SamplerConfig, run_sampler

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL_MC = 4


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        outdir = Path(
            args.output_dir
            or section(config, "output").get("directory")
            or "sulp-output"
        )
        if args.command == "estimate":
            return cmd_estimate(config, outdir, seed_override=args.seed)
        if args.command == "simulate":
            return cmd_simulate(config, outdir, seed_override=args.seed)
        if args.command == "montecarlo":
            return cmd_montecarlo(
                config, outdir, seed_override=args.seed, threads=args.threads
            )
        if args.command == "reweight":
            return cmd_reweight(config, outdir, seed_override=args.seed)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SULPError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sulp",
        description="Bayesian impulse responses via seemingly unrelated local projections",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("estimate", "estimate impulse responses on a CSV dataset"),
        ("simulate", "simulate the calibrated process and its true responses"),
        ("montecarlo", "run the replication experiment"),
        ("reweight", "power-posterior reweighting of a stored chain"),
    ]:
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="YAML configuration file")
        cmd.add_argument("--seed", type=int, default=None, help="override the configured seed")
        cmd.add_argument("--output-dir", default=None, help="override output.directory")
        cmd.add_argument("--threads", type=int, default=None, help="worker processes")
    return parser


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(config: dict, outdir: Path, seed_override: int | None = None) -> int:
    data_path = require(config, "data", "path")
    time_column = require(config, "data", "time_column")
    dataset = load_csv(data_path, time_column)

    spec_sec = section(config, "spec")
    dataset, spec = _prepare_design_inputs(dataset, spec_sec)
    std, scaling = standardize(dataset)
    system = build_design(std, spec)
    system.sv = bool(spec_sec.get("sv", False))
    system.correlated_measurement_errors = bool(
        spec_sec.get("correlated_measurement_errors", False)
    )

    hyper = _hyper_from_config(config, system.n_horizon_eqs)
    priors_sec = section(config, "priors")
    sampler_cfg = _sampler_from_config(
        config, seed_override, flat=bool(priors_sec.get("flat_prior", False))
    )
    rng = np.random.default_rng(sampler_cfg.rng_seed)
    chain = run_sampler(system, hyper=hyper, config=sampler_cfg, rng=rng)

    outdir.mkdir(parents=True, exist_ok=True)
    target_std = scaling.std(spec.target)
    _write_estimate_outputs(chain, system, std, spec, target_std, outdir)
    manifest_extra = {
        "command": "estimate",
        "config_hash": chainio.config_hash(config),
        "target_std": target_std,
        "irf_units": "target units per one-standard-deviation shock",
    }
    chainio.save_chain(chain, outdir, manifest_extra)
    return EXIT_OK


def _prepare_design_inputs(
    dataset: TimeSeriesDataset, spec_sec: dict
) -> tuple[TimeSeriesDataset, DesignSpec]:
    target = spec_sec.get("target")
    if not target:
        raise ConfigError("missing required config entry: spec.target")
    shocks = spec_sec.get("shocks")
    instruments = spec_sec.get("instruments")
    if (shocks is None) == (instruments is None):
        raise ConfigError("exactly one of spec.shocks / spec.instruments is required")

    if instruments is not None and spec_sec.get("common_factor"):
        instruments = [[name for group in instruments for name in group]]
    if instruments is not None and spec_sec.get("principal_component"):
        names = [name for group in instruments for name in group]
        pc = _first_pc_column(dataset, names)
        dataset = TimeSeriesDataset(
            names=dataset.names + ["pc1"],
            values=np.column_stack([dataset.values, pc]),
            time_index=list(dataset.time_index),
        )
        instruments = [["pc1"]]

    spec = DesignSpec(
        target=target,
        shocks=shocks,
        instruments=instruments,
        contemporaneous=spec_sec.get("contemporaneous") or [],
        lagged=spec_sec.get("lagged") or [],
        lags=spec_sec.get("lags", 1),
        horizons=spec_sec.get("horizons", 0),
        long_differences=bool(spec_sec.get("long_differences", False)),
        intercept=bool(spec_sec.get("intercept", False)),
        trend=bool(spec_sec.get("trend", False)),
    )
    return dataset, spec


def _first_pc_column(dataset: TimeSeriesDataset, names: list[str]) -> np.ndarray:
    block = np.column_stack([dataset.column(n) for n in names])
    if np.isnan(block).any():
        raise SULPError("instrument columns must be complete to form a principal component")
    std = (block - block.mean(axis=0)) / block.std(axis=0, ddof=1)
    _, _, vt = np.linalg.svd(std, full_matrices=False)
    pc = std @ vt[0]
    if pc @ std[:, 0] < 0:
        pc = -pc
    return pc


def _hyper_from_config(config: dict, H: int) -> HyperParams:
    sec = section(config, "priors")
    hyper = default_hyperparameters(H, s_scale=sec.get("s_scale") or 1.0)
    kern = hyper.kernel
    for key in ("xi_low", "xi_high", "varsigma_low", "varsigma_high",
                "m_xi", "v_xi", "m_varsigma", "v_varsigma"):
        if sec.get(key) is not None:
            setattr(kern, key, sec[key])
    kern.xi = min(max(kern.m_xi, kern.xi_low + 1e-9), kern.xi_high)
    kern.varsigma = min(max(kern.m_varsigma, kern.varsigma_low), kern.varsigma_high)
    ng = hyper.ng
    for key in ("a_tau", "b_tau", "theta_lambda"):
        if sec.get(key) is not None:
            setattr(ng, key, sec[key])
    for key in ("kappa_own", "kappa_cross", "kappa_det"):
        if sec.get(key) is not None:
            setattr(hyper, key, sec[key])
    meas = hyper.measurement
    for key in ("phi_mean", "phi_var", "delta_var", "a_sigma_nu", "b_sigma_nu"):
        if sec.get(key) is not None:
            setattr(meas, key, sec[key])
    if sec.get("flat_prior_variance") is not None:
        hyper.flat_prior_variance = sec["flat_prior_variance"]
    return hyper


def _sampler_from_config(
    config: dict, seed_override: int | None, flat: bool = False
) -> SamplerConfig:
    sec = section(config, "sampler")
    seed = seed_override if seed_override is not None else sec.get("seed", 0)
    return SamplerConfig(
        n_draws=sec.get("n_draws", 12_000),
        burn_in=sec.get("burn_in", 3_000),
        thin=sec.get("thin", 3),
        mh_step_xi=sec.get("mh_step_xi", 0.05),
        mh_step_varsigma=sec.get("mh_step_varsigma", 0.25),
        adapt_target=sec.get("adapt_target", 0.30),
        rng_seed=seed,
        flat_prior=flat,
    )


def _write_estimate_outputs(
    chain: Chain,
    system: SULPSystem,
    std_dataset: TimeSeriesDataset,
    spec: DesignSpec,
    target_std: float,
    outdir: Path,
) -> None:
    weights = importance_weights(chain.loglik, 1.0)
    irf_rows: list[dict] = []
    gp_rows: list[dict] = []
    for i, shock in enumerate(chain.shock_names):
        beta = chain.draws["beta"][:, i, :] * target_std
        mu = chain.draws["mu_beta"][:, i, :] * target_std
        irf_rows += chainio.quantile_rows(beta, weights, extra={"shock": shock})
        gp_rows += chainio.quantile_rows(mu, weights, extra={"shock": shock})
    fields = chainio.quantile_fieldnames(extra=["shock"])
    chainio.write_csv(outdir / "irf.csv", fields, irf_rows)
    chainio.write_csv(outdir / "irf_gp.csv", fields, gp_rows)

    if system.latent_shocks and "x" in chain.draws:
        labels = design_origin_labels(std_dataset, spec)
        shock_rows: list[dict] = []
        relevance_rows: list[dict] = []
        S = chain.n_stored
        for i, shock in enumerate(chain.shock_names):
            x_draws = chain.draws["x"][:, :, i]
            rows = chainio.quantile_rows(
                x_draws, weights, index_name="t", extra={"shock": shock}
            )
            for row in rows:
                row["time"] = labels[row["t"]]
            shock_rows += rows
            phi2 = chain.draws["phi"][:, i, 0] ** 2
            if "logvol" in chain.draws:
                var_x = np.exp(chain.draws["logvol"][:, :, i])
            else:
                var_x = np.ones((S, x_draws.shape[1]))
            nu_var = chain.draws["sigma_nu"][:, i, 0]
            rel = phi2[:, None] * var_x / (phi2[:, None] * var_x + nu_var[:, None])
            rows = chainio.quantile_rows(
                rel, weights, index_name="t", extra={"shock": shock}
            )
            for row in rows:
                row["time"] = labels[row["t"]]
            relevance_rows += rows
        fields_t = chainio.quantile_fieldnames(index_name="t", extra=["shock", "time"])
        chainio.write_csv(outdir / "shocks.csv", fields_t, shock_rows)
        chainio.write_csv(outdir / "relevance.csv", fields_t, relevance_rows)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(config: dict, outdir: Path, seed_override: int | None = None) -> int:
    sec = section(config, "simulate")
    params = _calibration_from_section(sec)
    if sec.get("alpha") is not None:
        params = replace(params, alpha=float(sec["alpha"]))
    T = sec.get("T", 250)
    horizons = sec.get("horizons", 16)
    seed = seed_override if seed_override is not None else sec.get("seed", 0)
    rng = np.random.default_rng(seed)
    data, shocks = simulate_varma(params, T, rng)
    irf = true_irf(params, T, horizons=horizons)

    outdir.mkdir(parents=True, exist_ok=True)
    names = params.variable_names or [f"v{i}" for i in range(params.n_vars)]
    data_rows = []
    for t in range(T):
        row = {"time": t + 1, "shock": shocks[t]}
        row.update({name: data[t, j] for j, name in enumerate(names)})
        data_rows.append(row)
    chainio.write_csv(outdir / "data.csv", ["time"] + names + ["shock"], data_rows)
    truth_rows = [{"h": h, "beta_star": irf.beta_star[h]} for h in range(horizons + 1)]
    chainio.write_csv(outdir / "truth.csv", ["h", "beta_star"], truth_rows)
    manifest = {
        "command": "simulate",
        "config_hash": chainio.config_hash(config),
        "seed": seed,
        "T": T,
        "alpha": params.alpha,
        "pi": params.pi,
        "target": names[params.target_index],
        "shock_variable": names[params.shock_index],
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def _calibration_from_section(sec: dict):
    if sec.get("calibration"):
        return load_calibration(path=sec["calibration"])
    return load_calibration(preset=sec.get("preset", "varma7"))


# ---------------------------------------------------------------------------
# montecarlo


def cmd_montecarlo(
    config: dict,
    outdir: Path,
    seed_override: int | None = None,
    threads: int | None = None,
) -> int:
    sec = section(config, "montecarlo")
    mc = MCConfig(
        n_reps=sec.get("n_reps", 200),
        T_grid=tuple(sec.get("T_grid") or (250,)),
        alpha_grid=tuple(sec.get("alpha_grid") or (2.0,)),
        horizons=sec.get("horizons", 16),
        estimators=tuple(sec.get("estimators") or ("su-lp", "lp", "lp-smooth")),
        level=sec.get("level", 0.90),
        c_grid=tuple(sec["c_grid"]) if sec.get("c_grid") else None,
        seed=seed_override if seed_override is not None else sec.get("seed", 0),
        calibration=sec.get("calibration"),
        lags=sec.get("lags", 5),
        n_draws=sec.get("n_draws", 12_000),
        burn_in=sec.get("burn_in", 3_000),
        thin=sec.get("thin", 3),
        checkpoint_dir=sec.get("checkpoint_dir") or str(outdir / "checkpoints"),
        workers=threads if threads is not None else sec.get("workers", 1),
    )
    result = run_monte_carlo(mc)

    outdir.mkdir(parents=True, exist_ok=True)
    rows = result.metrics_rows()
    chainio.write_csv(
        outdir / "results.csv",
        ["estimator", "T", "alpha", "h", "metric", "value", "n_reps", "n_fail"],
        rows,
    )
    if mc.c_grid:
        coarse_rows = []
        for (T, alpha), chains in result.chains.items():
            sweep = coarsening_sweep(
                chains, mc.c_grid, result.beta_star[(T, alpha)], mc.level
            )
            for c, cell in sweep.items():
                for h in range(mc.horizons + 1):
                    coarse_rows.append(
                        {
                            "T": T,
                            "alpha": alpha,
                            "c": c,
                            "h": h,
                            "coverage": cell["coverage"][h],
                            "bias_median": cell["bias_median"][h],
                            "std": cell["std"][h],
                            "ess_median": cell["ess_median"],
                        }
                    )
        chainio.write_csv(
            outdir / "coarsening.csv",
            ["T", "alpha", "c", "h", "coverage", "bias_median", "std", "ess_median"],
            coarse_rows,
        )
    manifest = {
        "command": "montecarlo",
        "config_hash": chainio.config_hash(config),
        "seed": mc.seed,
        "n_reps": mc.n_reps,
        "T_grid": list(mc.T_grid),
        "alpha_grid": list(mc.alpha_grid),
        "estimators": list(mc.estimators),
        "level": mc.level,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    (outdir / "runtime.json").write_text(
        json.dumps({"runtime_seconds": result.runtime_seconds}, indent=1) + "\n"
    )

    worst = 0.0
    for key, n_fail in result.failures.items():
        worst = max(worst, n_fail / mc.n_reps)
    if worst > 0.10:
        print(f"warning: estimator failure rate {worst:.0%} exceeds 10%", file=sys.stderr)
        return EXIT_PARTIAL_MC
    return EXIT_OK


# ---------------------------------------------------------------------------
# reweight


def cmd_reweight(config: dict, outdir: Path, seed_override: int | None = None) -> int:
    sec = section(config, "reweight")
    chain_dir = require(config, "reweight", "chain_dir")
    chain, manifest = chainio.load_chain(chain_dir)
    c_list = sec.get("c") or [1.0]
    target_std = manifest.get("target_std", 1.0)

    outdir.mkdir(parents=True, exist_ok=True)
    grid_rows = []
    fields = chainio.quantile_fieldnames(extra=["shock"])
    for c in c_list:
        w = importance_weights(chain.loglik, c)
        ess = effective_sample_size(w)
        rows = []
        for i, shock in enumerate(chain.shock_names):
            beta = chain.draws["beta"][:, i, :] * target_std
            rows += chainio.quantile_rows(beta, w, extra={"shock": shock})
        chainio.write_csv(outdir / f"irf_c{c:.2f}.csv", fields, rows)
        np.savez_compressed(
            outdir / f"weights_c{c:.2f}.npz", weights=w, c=np.array(c), ess=np.array(ess)
        )
        for row in rows:
            grid_rows.append(
                {
                    "c": c,
                    "shock": row["shock"],
                    "h": row["h"],
                    "ess": ess,
                    "width90": row["q95"] - row["q05"],
                }
            )
    chainio.write_csv(outdir / "grid.csv", ["c", "shock", "h", "ess", "width90"], grid_rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
