"""Classical comparators: per-horizon OLS with HAC errors, and penalized
smooth projections with a cross-validated roughness penalty.

Both drop origins whose lead runs past the sample (complete-case rows) and
report per-horizon point estimates, standard errors, and symmetric normal
intervals through one shared result type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from sulp.errors import SULPError
from sulp.model import SULPSystem


@dataclass
class ClassicalLPResult:
    """Point estimates and standard errors for the shock coefficient path."""

    beta_hat: np.ndarray  # (H,)
    se: np.ndarray  # (H,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.beta_hat = np.asarray(self.beta_hat, dtype=float)
        self.se = np.asarray(self.se, dtype=float)
        if np.any(self.se < 0):
            raise SULPError("standard errors must be nonnegative")

    def ci(self, level: float = 0.90) -> np.ndarray:
        """(H, 2) equal-tailed normal intervals at the given coverage level."""
        if not (0.0 < level < 1.0):
            raise SULPError("level must be in (0, 1)")
        zcrit = special.ndtri(0.5 + level / 2.0)
        return np.column_stack(
            (self.beta_hat - zcrit * self.se, self.beta_hat + zcrit * self.se)
        )


def newey_west(scores: np.ndarray, lags: int) -> np.ndarray:
    """Bartlett-kernel long-run covariance of a (T, k) score sequence."""
    T = scores.shape[0]
    omega = scores.T @ scores
    for ell in range(1, min(lags, T - 1) + 1):
        weight = 1.0 - ell / (lags + 1.0)
        gamma = scores[ell:].T @ scores[:-ell]
        omega += weight * (gamma + gamma.T)
    return omega


def ols_lp_hac(
    system: SULPSystem,
    shock: int = 0,
    bandwidth: int | None = None,
) -> ClassicalLPResult:
    """Per-horizon OLS of the lead on (shock, controls) with HAC variances.

    The truncation lag defaults to the horizon itself, matching the order of
    the moving-average dependence the projection errors carry at that
    horizon; pass ``bandwidth`` to override it everywhere.
    """
    H = system.n_horizon_eqs
    beta_hat = np.empty(H)
    se = np.empty(H)
    lags_used = []
    for h in range(H):
        rows = ~np.isnan(system.y[:, h])
        y = system.y[rows, h]
        g = _regressor_matrix(system, rows)
        if y.size <= g.shape[1] + 1:
            raise SULPError(f"too few complete rows at horizon {h}")
        gram = g.T @ g
        try:
            cf = linalg.cho_factor(gram, lower=True)
        except linalg.LinAlgError as exc:
            raise SULPError(f"rank-deficient design at horizon {h}") from exc
        coef = linalg.cho_solve(cf, g.T @ y)
        resid = y - g @ coef
        lag = h if bandwidth is None else bandwidth
        omega = newey_west(g * resid[:, None], lag)
        bread = linalg.cho_solve(cf, np.eye(g.shape[1]))
        cov = bread @ omega @ bread
        beta_hat[h] = coef[shock]
        se[h] = np.sqrt(max(cov[shock, shock], 0.0))
        lags_used.append(lag)
    return ClassicalLPResult(
        beta_hat=beta_hat,
        se=se,
        meta={"estimator": "lp", "bandwidth": lags_used},
    )


def smooth_lp(
    system: SULPSystem,
    shock: int = 0,
    order: int = 2,
    lambda_grid: np.ndarray | None = None,
    folds: int = 5,
    lambda_override: float | None = None,
) -> ClassicalLPResult:
    """Stacked projections with a penalty on differences of the response path.

    Controls are partialed out per horizon on the complete-case rows, which
    leaves a small penalized system in the response path alone; the penalty
    weight is chosen by contiguous blocked cross-validation on the projection
    residuals. Variances use the ridge sandwich with a HAC middle.
    """
    H = system.n_horizon_eqs
    if lambda_grid is None:
        lambda_grid = np.concatenate(([0.0], np.logspace(-2, 6, 25)))
    pen = _difference_penalty(H, order)

    xt, yt, row_masks = _partial_out_controls(system, shock)
    if lambda_override is not None:
        lam = float(lambda_override)
        cv_curve = None
    else:
        cv_curve = _cv_curve(system, shock, lambda_grid, folds, order)
        lam = float(lambda_grid[int(np.argmin(cv_curve))])

    diag = np.array([float(x @ x) for x in xt])
    lhs = np.diag(diag) + lam * pen
    rhs = np.array([float(x @ y) for x, y in zip(xt, yt)])
    try:
        beta_hat = linalg.solve(lhs, rhs, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise SULPError("singular penalized system") from exc

    # sandwich variance with a HAC middle over the per-origin score vectors
    T = system.n_origins
    scores = np.zeros((T, H))
    for h in range(H):
        resid_h = yt[h] - beta_hat[h] * xt[h]
        scores[row_masks[h], h] = xt[h] * resid_h
    omega = newey_west(scores, H - 1)
    bread = linalg.solve(lhs, np.eye(H), assume_a="sym")
    cov = bread @ omega @ bread
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return ClassicalLPResult(
        beta_hat=beta_hat,
        se=se,
        meta={
            "estimator": "lp-smooth",
            "lambda": lam,
            "order": order,
            "cv_curve": None if cv_curve is None else cv_curve.tolist(),
        },
    )


def _regressor_matrix(system: SULPSystem, rows: np.ndarray) -> np.ndarray:
    if system.x_obs is None:
        raise SULPError("classical projections need observed shocks")
    blocks = [system.x_obs[rows]]
    if system.n_controls:
        blocks.append(system.z[rows])
    return np.column_stack(blocks)


def _partial_out_controls(
    system: SULPSystem, shock: int, rows_subset: np.ndarray | None = None
) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """Residualize lead and shock on the controls, horizon by horizon."""
    H = system.n_horizon_eqs
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    base = np.ones(system.n_origins, dtype=bool) if rows_subset is None else rows_subset
    for h in range(H):
        rows = base & ~np.isnan(system.y[:, h])
        y = system.y[rows, h]
        x = system.x_obs[rows, shock]
        others = np.delete(system.x_obs[rows], shock, axis=1)
        ctrl_blocks = [b for b in (others, system.z[rows]) if b.shape[1]]
        if ctrl_blocks:
            z = np.column_stack(ctrl_blocks)
            coef_y, *_ = np.linalg.lstsq(z, y, rcond=None)
            coef_x, *_ = np.linalg.lstsq(z, x, rcond=None)
            y = y - z @ coef_y
            x = x - z @ coef_x
        xs.append(x)
        ys.append(y)
        masks.append(rows)
    return xs, ys, masks


def _cv_curve(
    system: SULPSystem,
    shock: int,
    lambda_grid: np.ndarray,
    folds: int,
    order: int,
) -> np.ndarray:
    """Sum of squared held-out projection residuals per penalty value.

    Control coefficients are estimated on the training block and applied to
    the held-out block, so the fold only scores genuinely out-of-sample
    residuals.
    """
    H = system.n_horizon_eqs
    T = system.n_origins
    pen = _difference_penalty(H, order)
    bounds = np.linspace(0, T, folds + 1).astype(int)
    errors = np.zeros(lambda_grid.size)
    for f in range(folds):
        test = np.zeros(T, dtype=bool)
        test[bounds[f] : bounds[f + 1]] = True
        train = ~test
        xt: list[np.ndarray] = []
        yt: list[np.ndarray] = []
        xv: list[np.ndarray] = []
        yv: list[np.ndarray] = []
        for h in range(H):
            rows_tr = train & ~np.isnan(system.y[:, h])
            rows_te = test & ~np.isnan(system.y[:, h])
            x_tr, y_tr, x_te, y_te = _residualize_with_train_coefs(
                system, shock, h, rows_tr, rows_te
            )
            xt.append(x_tr)
            yt.append(y_tr)
            xv.append(x_te)
            yv.append(y_te)
        diag = np.array([float(x @ x) for x in xt])
        rhs = np.array([float(x @ y) for x, y in zip(xt, yt)])
        for li, lam in enumerate(lambda_grid):
            beta = linalg.solve(np.diag(diag) + lam * pen, rhs, assume_a="sym")
            errors[li] += sum(
                float(np.sum((yv[h] - beta[h] * xv[h]) ** 2)) for h in range(H)
            )
    return errors


def _residualize_with_train_coefs(
    system: SULPSystem,
    shock: int,
    h: int,
    rows_tr: np.ndarray,
    rows_te: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    y_tr = system.y[rows_tr, h]
    x_tr = system.x_obs[rows_tr, shock]
    y_te = system.y[rows_te, h]
    x_te = system.x_obs[rows_te, shock]

    def controls(rows: np.ndarray) -> np.ndarray | None:
        others = np.delete(system.x_obs[rows], shock, axis=1)
        blocks = [b for b in (others, system.z[rows]) if b.shape[1]]
        return np.column_stack(blocks) if blocks else None

    z_tr = controls(rows_tr)
    if z_tr is None:
        return x_tr, y_tr, x_te, y_te
    coef_y, *_ = np.linalg.lstsq(z_tr, y_tr, rcond=None)
    coef_x, *_ = np.linalg.lstsq(z_tr, x_tr, rcond=None)
    z_te = controls(rows_te)
    y_tr = y_tr - z_tr @ coef_y
    x_tr = x_tr - z_tr @ coef_x
    if z_te is not None and z_te.shape[0]:
        y_te = y_te - z_te @ coef_y
        x_te = x_te - z_te @ coef_x
    return x_tr, y_tr, x_te, y_te


def _difference_penalty(H: int, order: int) -> np.ndarray:
    if order < 0 or order >= H:
        raise SULPError("difference order must be in [0, H)")
    d = np.eye(H)
    for _ in range(order):
        d = np.diff(d, axis=0)
    return d.T @ d
