"""Chain persistence and result-file writers.

A chain lives as a columnar .npz of draw arrays next to a JSON manifest
carrying run metadata. Result CSVs use fixed number formatting and sorted
manifests carry no timestamps, so fixed-seed reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from sulp.errors import SULPError
from sulp.randutil import quantile_weighted
from sulp.sampler import Chain, SamplerConfig

SUMMARY_QUANTILES = (0.05, 0.16, 0.50, 0.84, 0.95)
_FLOAT_FMT = "%.12g"


def config_hash(payload: dict) -> str:
    """Stable hash of a canonical JSON rendering of the configuration."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def save_chain(chain: Chain, directory: str | Path, manifest_extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    npz_path = directory / "chain.npz"
    np.savez_compressed(npz_path, **chain.draws)
    manifest = {
        "schema_version": 1,
        "n_stored": chain.n_stored,
        "n_draws": chain.config.n_draws,
        "burn_in": chain.config.burn_in,
        "thin": chain.config.thin,
        "rng_seed": chain.config.rng_seed,
        "flat_prior": chain.config.flat_prior,
        "target": chain.target,
        "shock_names": chain.shock_names,
        "acceptance": chain.acceptance,
        "fields": sorted(chain.draws),
    }
    manifest.update(manifest_extra or {})
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n"
    )
    return npz_path


def load_chain(directory: str | Path) -> tuple[Chain, dict]:
    directory = Path(directory)
    npz_path = directory / "chain.npz"
    manifest_path = directory / "manifest.json"
    if not npz_path.exists() or not manifest_path.exists():
        raise SULPError(f"no chain found under {directory}")
    manifest = json.loads(manifest_path.read_text())
    with np.load(npz_path) as data:
        draws = {key: data[key] for key in data.files}
    config = SamplerConfig(
        n_draws=manifest["n_draws"],
        burn_in=manifest["burn_in"],
        thin=manifest["thin"],
        rng_seed=manifest["rng_seed"],
        flat_prior=manifest.get("flat_prior", False),
    )
    chain = Chain(
        draws=draws,
        config=config,
        acceptance=manifest.get("acceptance", {}),
        target=manifest.get("target", "w"),
        shock_names=list(manifest.get("shock_names", [])),
    )
    return chain, manifest


def write_csv(path: str | Path, fieldnames: list[str], rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(row.get(k)) for k in fieldnames})


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return _FLOAT_FMT % value
    return str(value)


def quantile_rows(
    draws: np.ndarray,
    weights: np.ndarray | None = None,
    index_name: str = "h",
    extra: dict | None = None,
) -> list[dict]:
    """Per-column weighted quantile rows for an (S, n) draw matrix."""
    rows = []
    for j in range(draws.shape[1]):
        qs = quantile_weighted(draws[:, j], list(SUMMARY_QUANTILES), weights)
        row = {index_name: j}
        row.update(extra or {})
        row.update(
            {f"q{int(100 * q):02d}": v for q, v in zip(SUMMARY_QUANTILES, qs)}
        )
        if weights is None:
            row["mean"] = float(draws[:, j].mean())
        else:
            row["mean"] = float(np.sum(draws[:, j] * weights))
        rows.append(row)
    return rows


def quantile_fieldnames(index_name: str = "h", extra: list[str] | None = None) -> list[str]:
    return (
        [index_name]
        + (extra or [])
        + [f"q{int(100 * q):02d}" for q in SUMMARY_QUANTILES]
        + ["mean"]
    )
