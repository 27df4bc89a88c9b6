"""Run-configuration schema: one YAML file drives every CLI command.

Validation is strict: unknown keys are rejected and type errors name the
offending section.key path so config mistakes fail before any computation.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from sulp.errors import ConfigError

_SCHEMA: dict[str, dict[str, Any]] = {
    "data": {
        "path": str,
        "time_column": str,
    },
    "spec": {
        "target": str,
        "shocks": [str],
        "instruments": [[str]],
        "contemporaneous": [str],
        "lagged": [str],
        "lags": int,
        "horizons": int,
        "long_differences": bool,
        "intercept": bool,
        "trend": bool,
        "sv": bool,
        "correlated_measurement_errors": bool,
        "common_factor": bool,
        "principal_component": bool,
    },
    "priors": {
        "s_scale": float,
        "xi_low": float,
        "xi_high": float,
        "varsigma_low": float,
        "varsigma_high": float,
        "m_xi": float,
        "v_xi": float,
        "m_varsigma": float,
        "v_varsigma": float,
        "a_tau": float,
        "b_tau": float,
        "theta_lambda": float,
        "kappa_own": float,
        "kappa_cross": float,
        "kappa_det": float,
        "levels": bool,
        "flat_prior": bool,
        "flat_prior_variance": float,
        "phi_mean": float,
        "phi_var": float,
        "delta_var": float,
        "a_sigma_nu": float,
        "b_sigma_nu": float,
    },
    "sampler": {
        "n_draws": int,
        "burn_in": int,
        "thin": int,
        "mh_step_xi": float,
        "mh_step_varsigma": float,
        "adapt_target": float,
        "seed": int,
    },
    "output": {
        "directory": str,
    },
    "simulate": {
        "preset": str,
        "calibration": str,
        "alpha": float,
        "T": int,
        "horizons": int,
        "seed": int,
    },
    "montecarlo": {
        "n_reps": int,
        "T_grid": [int],
        "alpha_grid": [float],
        "horizons": int,
        "estimators": [str],
        "level": float,
        "c_grid": [float],
        "seed": int,
        "calibration": str,
        "lags": int,
        "n_draws": int,
        "burn_in": int,
        "thin": int,
        "workers": int,
        "checkpoint_dir": str,
    },
    "reweight": {
        "chain_dir": str,
        "c": [float],
        "resample_draws": int,
        "seed": int,
    },
}


def load_config(path: str | Path) -> dict:
    """Parse and validate a YAML run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config top level must be a mapping of sections")
    return validate_config(raw)


def validate_config(raw: dict) -> dict:
    out: dict = {}
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section: {section!r}")
        if content is None:
            out[section] = {}
            continue
        if not isinstance(content, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        schema = _SCHEMA[section]
        checked: dict = {}
        for key, value in content.items():
            if key not in schema:
                raise ConfigError(f"unknown key: {section}.{key}")
            checked[key] = _coerce(value, schema[key], f"{section}.{key}")
        out[section] = checked
    return out


def _coerce(value: Any, spec: Any, where: str) -> Any:
    if value is None:
        return None
    if isinstance(spec, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        return [_coerce(v, spec[0], f"{where}[{i}]") for i, v in enumerate(value)]
    if spec is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if spec is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return int(value)
    if spec is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if spec is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    raise ConfigError(f"internal schema error at {where}")


def section(config: dict, name: str) -> dict:
    return config.get(name, {}) or {}


def require(config: dict, section_name: str, key: str) -> Any:
    sec = section(config, section_name)
    if key not in sec or sec[key] is None:
        raise ConfigError(f"missing required config entry: {section_name}.{key}")
    return sec[key]
