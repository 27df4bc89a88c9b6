"""Data ingestion, standardization, and construction of the stacked LP design.

The design builder turns a named time-series panel into the system estimated
by the sampler: an origin-by-horizon response matrix, the shock (or
instrument) columns, and a control block holding contemporaneous covariates
plus lags. Leads that run past the end of the sample are kept as missing
entries instead of shrinking the sample.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sulp.errors import (
    ConstantColumnError,
    DuplicateColumnError,
    InsufficientSampleError,
    MissingColumnError,
    NonMonotoneTimeError,
    RaggedRowsError,
    SULPError,
)
from sulp.model import SULPSystem

MISSING_MARKERS = {"", "NA"}


@dataclass
class TimeSeriesDataset:
    """Named columns over a strictly increasing time index.

    Missing cells are stored as NaN; ``mask`` is True where a value is
    observed.
    """

    names: list[str]
    values: np.ndarray  # (T_raw, n_cols), NaN where missing
    time_index: list[str]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise SULPError("values must be a 2-D array")
        if self.values.shape[1] != len(self.names):
            raise SULPError("number of names must match number of columns")
        if self.values.shape[0] != len(self.time_index):
            raise SULPError("time index length must match number of rows")
        if len(set(self.names)) != len(self.names):
            raise DuplicateColumnError("duplicate column names in dataset")
        _check_monotone(self.time_index)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self._index(name)]

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingColumnError(f"column not in dataset: {name!r}") from None


@dataclass
class ScalingInfo:
    """Per-column mean/std recorded when standardizing, used to invert it."""

    means: dict[str, float]
    stds: dict[str, float]

    def mean(self, name: str) -> float:
        self._require(name)
        return self.means[name]

    def std(self, name: str) -> float:
        self._require(name)
        return self.stds[name]

    def _require(self, name: str) -> None:
        if name not in self.stds:
            raise MissingColumnError(f"no scaling entry for column: {name!r}")


@dataclass
class DesignSpec:
    """What to project on what: target, shocks or instruments, controls.

    ``lagged`` lists the columns whose lags 1..P enter the control block; the
    target and instrument columns are not added automatically, so list them
    here when their lags should be controlled for. ``contemporaneous``
    columns enter at time t (and must not include the target).
    """

    target: str
    shocks: list[str] | None = None
    instruments: list[list[str]] | None = None
    contemporaneous: list[str] = field(default_factory=list)
    lagged: list[str] = field(default_factory=list)
    lags: int = 1
    horizons: int = 0  # H tilde; the system spans H = horizons + 1 equations
    long_differences: bool = False
    intercept: bool = False
    trend: bool = False

    def __post_init__(self) -> None:
        if (self.shocks is None) == (self.instruments is None):
            raise SULPError("exactly one of shocks/instruments must be given")
        if self.instruments is not None and any(len(g) == 0 for g in self.instruments):
            raise SULPError("every instrumented shock needs at least one instrument")
        if self.lags < 1:
            raise SULPError("lag order must be >= 1")
        if self.horizons < 0:
            raise SULPError("horizons must be >= 0")
        if self.target in self.contemporaneous:
            raise SULPError("target cannot be a contemporaneous control")

    @property
    def n_horizon_eqs(self) -> int:
        return self.horizons + 1

    @property
    def n_shocks(self) -> int:
        return len(self.shocks) if self.shocks is not None else len(self.instruments)

    @property
    def n_controls(self) -> int:
        """Width of the control block, deterministic terms included."""
        n_r, n_s = len(self.contemporaneous), len(self.lagged)
        return int(self.intercept) + int(self.trend) + n_r + self.lags * (n_r + n_s)


def load_csv(path: str | Path, time_column: str) -> TimeSeriesDataset:
    """Read a rectangular numeric CSV with a header row.

    Empty cells and the literal "NA" parse as missing; any other
    non-numeric token is an error.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SULPError(f"empty file: {path}")
    header = [c.strip() for c in rows[0]]
    if len(set(header)) != len(header):
        dupes = sorted({c for c in header if header.count(c) > 1})
        raise DuplicateColumnError(f"duplicate column names: {dupes}")
    if time_column not in header:
        raise MissingColumnError(f"time column {time_column!r} not in header")
    t_col = header.index(time_column)

    time_index: list[str] = []
    body: list[list[float]] = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RaggedRowsError(f"row {i} has {len(row)} cells, expected {len(header)}")
        parsed: list[float] = []
        for j, cell in enumerate(row):
            if j == t_col:
                time_index.append(cell.strip())
                continue
            token = cell.strip()
            if token in MISSING_MARKERS:
                parsed.append(math.nan)
                continue
            try:
                parsed.append(float(token))
            except ValueError:
                name = header[j]
                raise SULPError(
                    f"non-numeric cell {token!r} in column {name!r}, row {i}"
                ) from None
        body.append(parsed)

    names = [c for j, c in enumerate(header) if j != t_col]
    values = np.asarray(body, dtype=float).reshape(len(body), len(names))
    return TimeSeriesDataset(names=names, values=values, time_index=time_index)


def standardize(dataset: TimeSeriesDataset) -> tuple[TimeSeriesDataset, ScalingInfo]:
    """Scale every column to mean zero, unit sample std (T-1 denominator).

    Statistics are computed over observed cells only; missing cells stay NaN.
    """
    out = dataset.values.copy()
    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    for j, name in enumerate(dataset.names):
        col = dataset.values[:, j]
        obs = col[~np.isnan(col)]
        if obs.size < 2 or np.unique(obs).size < 2:
            raise ConstantColumnError(f"column {name!r} has no variation")
        mu = float(np.mean(obs))
        sd = float(np.std(obs, ddof=1))
        if sd <= 0.0 or not math.isfinite(sd):
            raise ConstantColumnError(f"column {name!r} has no variation")
        out[:, j] = (col - mu) / sd
        means[name] = mu
        stds[name] = sd
    scaled = TimeSeriesDataset(names=list(dataset.names), values=out, time_index=list(dataset.time_index))
    return scaled, ScalingInfo(means=means, stds=stds)


def unstandardize(dataset: TimeSeriesDataset, scaling: ScalingInfo) -> TimeSeriesDataset:
    """Invert :func:`standardize`."""
    out = dataset.values.copy()
    for j, name in enumerate(dataset.names):
        out[:, j] = out[:, j] * scaling.std(name) + scaling.mean(name)
    return TimeSeriesDataset(names=list(dataset.names), values=out, time_index=list(dataset.time_index))


def build_design(dataset: TimeSeriesDataset, spec: DesignSpec) -> SULPSystem:
    """Assemble the stacked system of horizon-specific projections.

    For each usable origin t the response row holds the leads
    (w_t, ..., w_{t+horizons}); leads past the end of the sample become
    entries of the missing index. Under ``long_differences`` the response is
    the lead minus w_{t-1} and the stochastic controls are first-differenced,
    while the shock/instrument columns stay in levels.
    """
    H = spec.n_horizon_eqs
    P = spec.lags
    T_raw = dataset.n_rows
    # long differences consume one extra lag through z_{t-1}
    first = P + 1 if spec.long_differences else P
    n_origins = T_raw - first
    if n_origins < 2 or T_raw < P + spec.horizons + 2:
        raise InsufficientSampleError(
            f"need more than {first + 2} rows for lags={P}, horizons={spec.horizons}; got {T_raw}"
        )
    origins = np.arange(first, T_raw)

    w = dataset.column(spec.target)
    y = np.full((n_origins, H), np.nan)
    for h in range(H):
        lead = origins + h
        ok = lead < T_raw
        y[ok, h] = w[lead[ok]]
    if spec.long_differences:
        y -= w[origins - 1][:, None]
    missing = np.argwhere(np.isnan(y))

    shock_names: list[str]
    instrument_names: list[list[str]] | None
    if spec.shocks is not None:
        shock_names = list(spec.shocks)
        instrument_names = None
        x_obs = np.column_stack([dataset.column(c)[origins] for c in shock_names])
        _require_complete(x_obs, "shock")
        m = None
    else:
        instrument_names = [list(g) for g in spec.instruments]
        shock_names = [f"shock_{i}" for i in range(len(instrument_names))]
        x_obs = None
        m = np.column_stack(
            [dataset.column(c)[origins] for group in instrument_names for c in group]
        )
        _require_complete(m, "instrument")

    z_cols: list[np.ndarray] = []
    z_labels: list[tuple] = []
    if spec.intercept:
        z_cols.append(np.ones(n_origins))
        z_labels.append(("const",))
    if spec.trend:
        z_cols.append((1.0 + np.arange(n_origins)) / n_origins)
        z_labels.append(("trend",))

    def stochastic(col: np.ndarray, offset: int) -> np.ndarray:
        base = col[origins - offset]
        if spec.long_differences:
            base = base - col[origins - offset - 1]
        return base

    for name in spec.contemporaneous:
        z_cols.append(stochastic(dataset.column(name), 0))
        z_labels.append(("contemp", name))
    lag_block = list(spec.contemporaneous) + list(spec.lagged)
    for p in range(1, P + 1):
        for name in lag_block:
            z_cols.append(stochastic(dataset.column(name), p))
            z_labels.append(("lag", name, p))
    z = np.column_stack(z_cols) if z_cols else np.empty((n_origins, 0))
    _require_complete(z, "control")

    return SULPSystem(
        y=y,
        x_obs=x_obs,
        m=m,
        z=z,
        missing=missing,
        z_labels=z_labels,
        target=spec.target,
        shock_names=shock_names,
        instrument_names=instrument_names,
        n_instruments_per_shock=(
            len(instrument_names[0]) if instrument_names is not None else 0
        ),
        long_differences=spec.long_differences,
    )


def design_origin_labels(dataset: TimeSeriesDataset, spec: DesignSpec) -> list[str]:
    """Time labels of the design's origin rows, matching build_design."""
    first = spec.lags + 1 if spec.long_differences else spec.lags
    return list(dataset.time_index[first:])


def rescale_irf(
    beta_draws: np.ndarray,
    scaling: ScalingInfo,
    target: str,
    shock_std: float = 1.0,
) -> np.ndarray:
    """Map standardized-scale response draws back to target units.

    With the default ``shock_std=1`` a response is per one-standard-deviation
    shock (the convention for latent unit-variance shocks); pass the shock
    column's recorded std to recover raw regression coefficients instead.
    """
    if shock_std <= 0:
        raise SULPError("shock_std must be positive")
    return np.asarray(beta_draws, dtype=float) * (scaling.std(target) / shock_std)


def _require_complete(block: np.ndarray, role: str) -> None:
    if np.isnan(block).any():
        raise SULPError(
            f"{role} columns contain missing values over the estimation range; "
            "only response leads may be missing"
        )


def _check_monotone(labels: list[str]) -> None:
    if len(labels) <= 1:
        return
    try:
        keys = [float(s) for s in labels]
    except ValueError:
        keys = list(labels)
    for a, b in zip(keys, keys[1:]):
        if not a < b:
            raise NonMonotoneTimeError(f"time index not strictly increasing at {b!r}")
