"""Generate the frozen DGP calibration files shipped with the package.

Run from the repository root:

    python tools/make_calibrations.py

The files are committed artifacts; regenerating with the same seeds
reproduces them bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sulp.dgp import VARMAParams, companion_spectral_radius, params_to_dict  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src" / "sulp" / "calibrations"


def _stable_var(
    rng: np.random.Generator,
    diag1: np.ndarray,
    P: int,
    cross_scale: float,
    target_radius: float,
) -> np.ndarray:
    n = diag1.size
    phi = np.empty((P, n, n))
    for p in range(P):
        phi[p] = rng.normal(0.0, cross_scale / (p + 1) ** 2, size=(n, n))
        if p == 0:
            phi[p][np.diag_indices(n)] += diag1
        else:
            phi[p][np.diag_indices(n)] += 0.1 / (p + 1)
    radius = companion_spectral_radius(phi)
    shrink = target_radius / radius
    for p in range(P):
        phi[p] *= shrink ** (p + 1)
    return phi


def _impact(rng: np.random.Generator, scales: np.ndarray) -> np.ndarray:
    n = scales.size
    low = np.eye(n)
    low[np.tril_indices(n, -1)] = rng.normal(0.0, 0.3, size=n * (n - 1) // 2)
    return low * scales[None, :]


def make_varma7(seed: int = 20240811) -> VARMAParams:
    rng = np.random.default_rng(seed)
    names = [
        "output_growth",
        "consumption_growth",
        "investment_growth",
        "inflation",
        "hours_growth",
        "policy_rate",
        "credit_spread",
    ]
    diag1 = np.array([0.25, 0.30, 0.25, 0.50, 0.30, 0.85, 0.80])
    phi = _stable_var(rng, diag1, P=5, cross_scale=0.08, target_radius=0.93)
    impact = _impact(rng, np.array([1.0, 0.8, 1.2, 0.6, 0.7, 0.5, 0.4]))
    ma = rng.standard_normal((10, 7, 7))
    return VARMAParams(
        phi=phi,
        impact=impact,
        ma=ma,
        alpha=0.0,
        pi=0.5,
        variable_names=names,
        target_index=0,
        shock_index=5,
    )


def make_varma3(seed: int = 20240812) -> VARMAParams:
    rng = np.random.default_rng(seed)
    names = ["output_growth", "inflation", "policy_rate"]
    diag1 = np.array([0.35, 0.45, 0.80])
    phi = _stable_var(rng, diag1, P=2, cross_scale=0.12, target_radius=0.90)
    impact = _impact(rng, np.array([1.0, 0.7, 0.5]))
    ma = rng.standard_normal((10, 3, 3))
    return VARMAParams(
        phi=phi,
        impact=impact,
        ma=ma,
        alpha=0.0,
        pi=0.5,
        variable_names=names,
        target_index=0,
        shock_index=2,
    )


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, params in [("varma7", make_varma7()), ("varma3", make_varma3())]:
        payload = params_to_dict(params)
        payload["schema_version"] = 1
        payload["generator_seed"] = 20240811 if name == "varma7" else 20240812
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(payload, indent=1, sort_keys=True))
        print(f"wrote {path} (radius={companion_spectral_radius(params.phi):.4f})")


if __name__ == "__main__":
    main()
