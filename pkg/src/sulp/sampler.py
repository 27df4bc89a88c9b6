"""The MCMC engine: conjugate Gibbs steps plus random-walk MH for the kernel.

Each sweep updates, in order: the stacked response coefficients and the
control block; the cross-horizon covariance and measurement-error variances;
the smooth prior mean, its kernel hyperparameters (with the mean integrated
out), and the shrinkage scales; then latent shocks, volatilities, and missing
responses. The kernel hyperparameter proposals adapt toward a target
acceptance rate during burn-in only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from sulp.errors import NumericalError, SULPError
from sulp.gig import sample_gig
from sulp.model import (
    ChainState,
    SULPSystem,
    log_pseudo_likelihood,
    measurement_residuals,
    residuals,
)
from sulp.priors import (
    ControlsPrior,
    CovPrior,
    GPKernelParams,
    HyperParams,
    MeasurementPrior,
    chol_with_jitter,
    default_hyperparameters,
    gp_kernel,
    minnesota_controls_prior,
)
from sulp.randutil import (
    sample_inverse_wishart,
    sample_mvn_precision,
    sample_truncated_normal,
)
from sulp.sv import draw_sv_block

_CHI_FLOOR = 1e-300  # below this the GIG chi argument is treated as zero


@dataclass
class SamplerConfig:
    """Run-length and proposal settings; the defaults match the benchmark run."""

    n_draws: int = 12_000
    burn_in: int = 3_000
    thin: int = 3
    mh_step_xi: float = 0.05
    mh_step_varsigma: float = 0.25
    adapt_target: float = 0.30
    rng_seed: int = 0
    flat_prior: bool = False
    store_gamma: bool = True
    store_latent: bool = True

    def __post_init__(self) -> None:
        if not (0 <= self.burn_in < self.n_draws):
            raise SULPError("burn-in must be shorter than the total draw count")
        if self.thin < 1:
            raise SULPError("thinning interval must be >= 1")
        if not (0.0 < self.adapt_target < 1.0):
            raise SULPError("acceptance target must be in (0, 1)")

    @property
    def n_stored(self) -> int:
        return len(range(self.burn_in, self.n_draws, self.thin))


@dataclass
class Chain:
    """Thinned post-burn-in draws plus run metadata."""

    draws: dict[str, np.ndarray]
    config: SamplerConfig
    acceptance: dict[str, float] = field(default_factory=dict)
    target: str = "w"
    shock_names: list[str] = field(default_factory=list)

    @property
    def n_stored(self) -> int:
        return self.draws["beta"].shape[0]

    @property
    def loglik(self) -> np.ndarray:
        return self.draws["log_pseudo_lik"]


# ---------------------------------------------------------------------------
# individual conditional draws


def draw_beta(
    system: SULPSystem,
    state: ChainState,
    rng: np.random.Generator,
    sigma_u_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Jointly draw every shock's response vector from its Gaussian posterior."""
    n_x, H = state.beta.shape
    if sigma_u_inv is None:
        sigma_u_inv = _spd_inverse(state.sigma_u)
    resid = state.y_filled - (system.z @ state.gamma if system.n_controls else 0.0)
    sxx = state.x.T @ state.x
    v_vec = state.v_beta().ravel(order="F")
    mu_vec = state.mu_beta.ravel(order="F")
    precision = np.kron(sigma_u_inv, sxx)
    precision[np.diag_indices_from(precision)] += 1.0 / v_vec
    linear = (state.x.T @ resid @ sigma_u_inv).ravel(order="F") + mu_vec / v_vec
    draw = sample_mvn_precision(precision, linear, rng)
    return draw.reshape(n_x, H, order="F")


@dataclass
class GammaStep:
    """Precomputed pieces of the control-coefficient posterior."""

    vbar: np.ndarray  # (Z'Z + V^-1)^-1
    vbar_chol: np.ndarray  # its lower Cholesky factor
    prior_load: np.ndarray  # V^-1 M (k, H)

    @classmethod
    def build(cls, z: np.ndarray, prior: ControlsPrior) -> "GammaStep":
        k = z.shape[1]
        if k == 0:
            empty = np.empty((0, 0))
            return cls(vbar=empty, vbar_chol=empty, prior_load=np.empty((0, prior.mean.shape[1])))
        precision = z.T @ z + np.diag(1.0 / prior.variances)
        cf = linalg.cho_factor(precision, lower=True)
        vbar = linalg.cho_solve(cf, np.eye(k))
        vbar = 0.5 * (vbar + vbar.T)
        return cls(
            vbar=vbar,
            vbar_chol=chol_with_jitter(vbar, label="controls posterior"),
            prior_load=prior.mean / prior.variances[:, None],
        )


def draw_gamma(
    system: SULPSystem,
    state: ChainState,
    step: GammaStep,
    rng: np.random.Generator,
) -> np.ndarray:
    """Matrix-variate draw of the control block, exploiting the Kronecker form."""
    k, H = state.gamma.shape
    if k == 0:
        return state.gamma
    resid = state.y_filled - state.x @ state.beta
    rhs = system.z.T @ resid + step.prior_load
    mean = step.vbar @ rhs
    lu = chol_with_jitter(state.sigma_u, label="sigma_u")
    return mean + step.vbar_chol @ rng.standard_normal((k, H)) @ lu.T


def draw_sigma_u(
    u: np.ndarray, prior: CovPrior, rng: np.random.Generator
) -> np.ndarray:
    """Inverse-Wishart draw given the current residual matrix."""
    T = u.shape[0]
    return sample_inverse_wishart(prior.s0 + T, prior.scale + u.T @ u, rng)


def draw_gp_mean(
    beta: np.ndarray,
    kernel_matrix: np.ndarray,
    v_beta: np.ndarray,
    rng: np.random.Generator,
    kernel_chol: np.ndarray | None = None,
) -> np.ndarray:
    """Draw the smooth prior mean given one shock's responses.

    Sampled pathwise: a prior draw is corrected through the gain
    K (K + V)^-1, which avoids factorizing the posterior covariance
    K - K (K + V)^-1 K (numerically singular under hard shrinkage).
    """
    H = beta.size
    if kernel_chol is None:
        kernel_chol = chol_with_jitter(kernel_matrix, label="gp kernel")
    cf = linalg.cho_factor(kernel_matrix + np.diag(v_beta), lower=True)
    prior_draw = kernel_chol @ rng.standard_normal(H)
    noise = np.sqrt(v_beta) * rng.standard_normal(H)
    adjust = linalg.cho_solve(cf, beta - prior_draw - noise)
    return prior_draw + kernel_matrix @ adjust


def marginal_beta_loglik(beta: np.ndarray, kernel_matrix: np.ndarray, v_beta: np.ndarray) -> float:
    """log N(beta | 0, K + V) up to the dimension constant."""
    cf = linalg.cho_factor(kernel_matrix + np.diag(v_beta), lower=True)
    half_logdet = float(np.sum(np.log(np.diag(cf[0]))))
    w = linalg.solve_triangular(cf[0], beta, lower=True)
    return -half_logdet - 0.5 * float(w @ w)


def draw_kernel_hyper(
    beta: np.ndarray,
    v_beta: np.ndarray,
    kernel: GPKernelParams,
    steps: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[float, float, bool, bool]:
    """Random-walk MH on (xi, varsigma) with the GP mean integrated out.

    Proposals falling outside the truncation bounds are rejected outright;
    inside the bounds the truncated-normal prior normalization cancels.
    """
    H = beta.size
    xi, vs = kernel.xi, kernel.varsigma
    K, _ = gp_kernel(H, xi, vs)
    current = marginal_beta_loglik(beta, K, v_beta)

    def log_prior(x: float, m: float, v: float) -> float:
        return -0.5 * (x - m) ** 2 / v

    accepted_xi = accepted_vs = False
    prop = xi + steps[0] * rng.standard_normal()
    log_u = math.log(rng.random())
    if kernel.xi_low < prop <= kernel.xi_high:
        cand = _try_marginal(beta, H, prop, vs, v_beta)
        if cand is not None:
            ratio = (cand + log_prior(prop, kernel.m_xi, kernel.v_xi)) - (
                current + log_prior(xi, kernel.m_xi, kernel.v_xi)
            )
            if log_u <= ratio:
                xi, current = prop, cand
                accepted_xi = True

    prop = vs + steps[1] * rng.standard_normal()
    log_u = math.log(rng.random())
    if kernel.varsigma_low <= prop <= kernel.varsigma_high:
        cand = _try_marginal(beta, H, xi, prop, v_beta)
        if cand is not None:
            ratio = (cand + log_prior(prop, kernel.m_varsigma, kernel.v_varsigma)) - (
                current + log_prior(vs, kernel.m_varsigma, kernel.v_varsigma)
            )
            if log_u <= ratio:
                vs = prop
                accepted_vs = True

    return xi, vs, accepted_xi, accepted_vs


def _try_marginal(
    beta: np.ndarray, H: int, xi: float, vs: float, v_beta: np.ndarray
) -> float | None:
    """Marginal log likelihood at a proposal; None when it is numerically invalid."""
    try:
        K, _ = gp_kernel(H, xi, vs)
        return marginal_beta_loglik(beta, K, v_beta)
    except (linalg.LinAlgError, SULPError):
        return None


def draw_ng_locals(
    beta: np.ndarray,
    mu_beta: np.ndarray,
    theta: float,
    tau2_tilde: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Local prior variances (global scale absorbed), one GIG draw per horizon.

    When the squared deviation underflows, the draw falls back to the exact
    gamma limit (order > 0) or to the gamma prior form (order <= 0), since
    the GIG conditional is improper at chi = 0 for negative orders.
    """
    nu = theta - 0.5
    psi = theta * tau2_tilde
    dev2 = (beta - mu_beta) ** 2
    out = np.empty_like(dev2)
    for h, chi in enumerate(dev2):
        if chi < _CHI_FLOOR:
            shape = nu if nu > 0 else theta
            out[h] = rng.gamma(shape, 2.0 / psi)
        else:
            out[h] = sample_gig(nu, float(chi), psi, rng)
    return out


def draw_ng_global(
    lambda2: np.ndarray,
    a_tau: float,
    b_tau: float,
    theta: float,
    rng: np.random.Generator,
) -> float:
    """Global shrinkage state; its reciprocal (times two) is the global variance."""
    lambda2 = np.asarray(lambda2, dtype=float)
    shape = a_tau + theta * lambda2.size
    rate = b_tau + 0.5 * theta * float(lambda2.sum())
    return float(rng.gamma(shape, 1.0 / rate))


def draw_latent_shocks(
    system: SULPSystem, state: ChainState, rng: np.random.Generator
) -> np.ndarray:
    """Per-period Gaussian draw of the latent shocks given data and parameters."""
    T = system.n_origins
    n_x = system.n_shocks
    n_m = system.n_instruments_per_shock
    sigma_u_inv = _spd_inverse(state.sigma_u)
    resid_y = state.y_filled - (system.z @ state.gamma if system.n_controls else 0.0)
    bsi = state.beta @ sigma_u_inv  # (n_x, H)
    data_prec = bsi @ state.beta.T  # (n_x, n_x)
    linear = resid_y @ bsi.T  # (T, n_x)

    phi_block = _loading_matrix(state.phi, n_x, n_m)
    nu_inv = _measurement_precision(state, n_x, n_m)
    resid_m = system.m - _fitted_instrument_controls(system, state)
    meas_prec = phi_block.T @ nu_inv @ phi_block
    linear += resid_m @ nu_inv @ phi_block

    var_x = state.shock_variances()  # (T, n_x)
    const = data_prec + meas_prec
    if n_x == 1:
        prec = 1.0 / var_x[:, 0] + const[0, 0]
        mean = linear[:, 0] / prec
        return (mean + rng.standard_normal(T) / np.sqrt(prec))[:, None]
    out = np.empty((T, n_x))
    noise = rng.standard_normal((T, n_x))
    homosked = state.logvol is None
    if homosked:
        cf = linalg.cho_factor(const + np.eye(n_x), lower=True)
        means = linalg.cho_solve(cf, linear.T).T
        scale = linalg.solve_triangular(cf[0], np.eye(n_x), lower=True, trans="T")
        return means + noise @ scale.T
    for t in range(T):
        prec_t = const + np.diag(1.0 / var_x[t])
        cf = linalg.cho_factor(prec_t, lower=True)
        mean_t = linalg.cho_solve(cf, linear[t])
        out[t] = mean_t + linalg.solve_triangular(cf[0], noise[t], lower=True, trans="T")
    return out


def draw_measurement_params(
    system: SULPSystem,
    state: ChainState,
    prior: MeasurementPrior,
    rng: np.random.Generator,
) -> None:
    """Update loadings, instrument controls, and measurement-error variances.

    The (loading, controls) block is drawn exactly under the positivity
    restriction: the loading comes from its truncated marginal via the
    inverse CDF and the controls from the conditional given that loading.
    """
    n_x = system.n_shocks
    n_m = system.n_instruments_per_shock
    k = system.n_controls
    T = system.n_origins

    if state.sigma_nu_full is not None:
        _draw_measurement_correlated(system, state, prior, rng)
        return

    for i in range(n_x):
        xi_col = state.x[:, i]
        for j in range(n_m):
            col = i * n_m + j
            m_col = system.m[:, col]
            w = np.column_stack([xi_col, system.z]) if k else xi_col[:, None]
            var = state.sigma_nu[i, j]
            prior_prec = np.concatenate(
                ([1.0 / prior.phi_var], np.full(k, 1.0 / prior.delta_var))
            )
            precision = w.T @ w / var + np.diag(prior_prec)
            linear = w.T @ m_col / var
            linear[0] += prior.phi_mean / prior.phi_var
            theta = _draw_gaussian_first_coord_positive(
                precision, linear, prior.phi_positive, rng
            )
            state.phi[i, j] = theta[0]
            if k:
                state.delta[i, j] = theta[1:]
            nu = m_col - w @ theta
            state.sigma_nu[i, j] = _draw_inverse_gamma(
                prior.a_sigma_nu + 0.5 * T,
                prior.b_sigma_nu + 0.5 * float(nu @ nu),
                rng,
            )


def _draw_measurement_correlated(
    system: SULPSystem,
    state: ChainState,
    prior: MeasurementPrior,
    rng: np.random.Generator,
) -> None:
    """Correlated measurement errors (one instrument per shock)."""
    n_x = system.n_shocks
    k = system.n_controls
    T = system.n_origins
    nu_inv = _spd_inverse(state.sigma_nu_full)
    for i in range(n_x):
        others = measurement_residuals(system, state)
        others[:, i] = system.m[:, i]  # keep block i's own fit out of the offset
        w = np.column_stack([state.x[:, i], system.z]) if k else state.x[:, i][:, None]
        prior_prec = np.concatenate(
            ([1.0 / prior.phi_var], np.full(k, 1.0 / prior.delta_var))
        )
        precision = nu_inv[i, i] * (w.T @ w) + np.diag(prior_prec)
        linear = w.T @ (others @ nu_inv[:, i])
        linear[0] += prior.phi_mean / prior.phi_var
        theta = _draw_gaussian_first_coord_positive(
            precision, linear, prior.phi_positive, rng
        )
        state.phi[i, 0] = theta[0]
        if k:
            state.delta[i, 0] = theta[1:]
    nu = measurement_residuals(system, state)
    s0 = prior.s0_nu if prior.s0_nu is not None else n_x + 5.0
    scale = (
        prior.scale_nu
        if prior.scale_nu is not None
        else 2.0 * prior.b_sigma_nu * np.eye(n_x)
    )
    state.sigma_nu_full = sample_inverse_wishart(s0 + T, scale + nu.T @ nu, rng)
    state.sigma_nu = np.diag(state.sigma_nu_full).reshape(n_x, 1).copy()


def _draw_gaussian_first_coord_positive(
    precision: np.ndarray,
    linear: np.ndarray,
    positive: bool,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact draw from N(P^-1 l, P^-1), optionally restricted to theta_0 > 0."""
    if not positive:
        return sample_mvn_precision(precision, linear, rng)
    cf = linalg.cho_factor(precision, lower=True)
    cov = linalg.cho_solve(cf, np.eye(precision.shape[0]))
    mean = cov @ linear
    phi = sample_truncated_normal(mean[0], cov[0, 0], 0.0, rng)
    if precision.shape[0] == 1:
        return np.array([phi])
    gain = cov[1:, 0] / cov[0, 0]
    cond_mean = mean[1:] + gain * (phi - mean[0])
    cond_cov = cov[1:, 1:] - np.outer(gain, cov[0, 1:])
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    L = chol_with_jitter(cond_cov, label="measurement controls")
    rest = cond_mean + L @ rng.standard_normal(cond_mean.size)
    return np.concatenate(([phi], rest))


def draw_missing(
    system: SULPSystem,
    state: ChainState,
    rng: np.random.Generator,
    fitted: np.ndarray | None = None,
) -> None:
    """Impute missing responses from their per-period conditional Gaussians."""
    rows = system.missing_by_row()
    if not rows:
        return
    prec = _spd_inverse(state.sigma_u)
    if fitted is None:
        fitted = state.x @ state.beta
        if system.n_controls:
            fitted = fitted + system.z @ state.gamma
    for t, cols, obs in rows:
        p_mm = prec[cols[:, None], cols[None, :]]
        cf = linalg.cho_factor(p_mm, lower=True, check_finite=False)
        mean = fitted[t, cols]
        if obs.size:
            shift = prec[cols[:, None], obs[None, :]] @ (
                state.y_filled[t, obs] - fitted[t, obs]
            )
            mean = mean - linalg.cho_solve(cf, shift, check_finite=False)
        noise = linalg.solve_triangular(
            cf[0],
            rng.standard_normal(cols.size),
            lower=True,
            trans="T",
            check_finite=False,
        )
        state.y_filled[t, cols] = mean + noise


# ---------------------------------------------------------------------------
# orchestration


def make_kernels(hyper: HyperParams, n_shocks: int) -> list[GPKernelParams]:
    """Per-shock kernel states started at the configured prior settings."""
    base = hyper.kernel
    return [
        GPKernelParams(
            xi=base.xi,
            varsigma=base.varsigma,
            xi_low=base.xi_low,
            xi_high=base.xi_high,
            varsigma_low=base.varsigma_low,
            varsigma_high=base.varsigma_high,
            m_xi=base.m_xi,
            v_xi=base.v_xi,
            m_varsigma=base.m_varsigma,
            v_varsigma=base.v_varsigma,
        )
        for _ in range(n_shocks)
    ]


def gibbs_sweep(
    system: SULPSystem,
    state: ChainState,
    hyper: HyperParams,
    kernels: list[GPKernelParams],
    gamma_step: GammaStep,
    rng: np.random.Generator,
    config: SamplerConfig | None = None,
    log_steps: np.ndarray | None = None,
    acc_counts: np.ndarray | None = None,
    sweep: int = 0,
) -> None:
    """One full update cycle over every conditional, in the documented order.

    Proposal-step adaptation runs only during the burn-in of a configured
    run; standalone callers (tests, diagnostics) get fixed proposal scales.
    """
    config = config or SamplerConfig(n_draws=1, burn_in=0, thin=1)
    H = system.n_horizon_eqs
    if log_steps is None:
        log_steps = np.log(
            np.tile([config.mh_step_xi, config.mh_step_varsigma], (system.n_shocks, 1))
        )

    step_name = "beta"
    try:
        sigma_u_inv = _spd_inverse(state.sigma_u)
        state.beta = draw_beta(system, state, rng, sigma_u_inv=sigma_u_inv)
        step_name = "gamma"
        state.gamma = draw_gamma(system, state, gamma_step, rng)
        step_name = "sigma_u"
        state.sigma_u = draw_sigma_u(residuals(system, state), hyper.cov, rng)
        if system.latent_shocks:
            step_name = "measurement"
            draw_measurement_params(system, state, hyper.measurement, rng)
        if not config.flat_prior:
            step_name = "kernel_hyper"
            v_beta = state.v_beta()
            for i, kern in enumerate(kernels):
                xi, vs, acc_xi, acc_vs = draw_kernel_hyper(
                    state.beta[i], v_beta[i], kern, tuple(np.exp(log_steps[i])), rng
                )
                kern.xi, kern.varsigma = xi, vs
                state.xi[i], state.varsigma[i] = xi, vs
                if sweep < config.burn_in:
                    gain = (sweep + 1.0) ** -0.6
                    log_steps[i, 0] += gain * (float(acc_xi) - config.adapt_target)
                    log_steps[i, 1] += gain * (float(acc_vs) - config.adapt_target)
                    np.clip(log_steps[i], math.log(1e-4), math.log(10.0), out=log_steps[i])
                elif acc_counts is not None:
                    acc_counts[i] += (float(acc_xi), float(acc_vs))
            step_name = "gp_mean"
            for i, kern in enumerate(kernels):
                K, L = gp_kernel(H, kern.xi, kern.varsigma)
                state.mu_beta[i] = draw_gp_mean(
                    state.beta[i], K, v_beta[i], rng, kernel_chol=L
                )
            step_name = "ng"
            for i in range(system.n_shocks):
                state.lambda2[i] = draw_ng_locals(
                    state.beta[i],
                    state.mu_beta[i],
                    hyper.ng.theta_lambda,
                    state.tau2_tilde[i],
                    rng,
                )
                state.tau2_tilde[i] = draw_ng_global(
                    state.lambda2[i],
                    hyper.ng.a_tau,
                    hyper.ng.b_tau,
                    hyper.ng.theta_lambda,
                    rng,
                )
        if system.latent_shocks:
            step_name = "latent_shocks"
            state.x = draw_latent_shocks(system, state, rng)
            if system.sv:
                step_name = "sv"
                for i in range(system.n_shocks):
                    h, rho, vol = draw_sv_block(
                        state.x[:, i],
                        state.logvol[:, i],
                        state.rho_x[i],
                        state.vol_of_vol[i],
                        hyper.sv,
                        rng,
                    )
                    state.logvol[:, i] = h
                    state.rho_x[i] = rho
                    state.vol_of_vol[i] = vol
        step_name = "missing"
        draw_missing(system, state, rng)
        state.log_pseudo_lik = log_pseudo_likelihood(system, state)
    except Exception as exc:
        raise NumericalError(f"step {step_name!r}: {exc}") from exc


def run_sampler(
    system: SULPSystem,
    hyper: HyperParams | None = None,
    config: SamplerConfig | None = None,
    rng: np.random.Generator | None = None,
    controls_prior: ControlsPrior | None = None,
) -> Chain:
    """Run the full posterior simulator and return the thinned chain."""
    config = config or SamplerConfig()
    H = system.n_horizon_eqs
    hyper = hyper or default_hyperparameters(H)
    rng = rng or np.random.default_rng(config.rng_seed)
    if controls_prior is None:
        controls_prior = minnesota_controls_prior(
            system.z_labels,
            H,
            system.target,
            kappa_own=hyper.kappa_own,
            kappa_cross=hyper.kappa_cross,
            kappa_det=hyper.kappa_det,
        )

    gamma_step = GammaStep.build(system.z, controls_prior)
    state = initialize_state(system, hyper, config)
    kernels = make_kernels(hyper, system.n_shocks)
    log_steps = np.log(
        np.tile([config.mh_step_xi, config.mh_step_varsigma], (system.n_shocks, 1))
    )
    acc_counts = np.zeros((system.n_shocks, 2))

    store = _allocate_storage(system, state, config)
    stored = 0
    for sweep in range(config.n_draws):
        try:
            gibbs_sweep(
                system,
                state,
                hyper,
                kernels,
                gamma_step,
                rng,
                config=config,
                log_steps=log_steps,
                acc_counts=acc_counts,
                sweep=sweep,
            )
        except Exception as exc:
            raise NumericalError(f"sampler failed at sweep {sweep}: {exc}") from exc

        if sweep >= config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            _store_draw(store, stored, system, state)
            stored += 1

    post = max(config.n_draws - config.burn_in, 1)
    acceptance = {
        "xi": float(np.mean(acc_counts[:, 0]) / post),
        "varsigma": float(np.mean(acc_counts[:, 1]) / post),
    }
    return Chain(
        draws=store,
        config=config,
        acceptance=acceptance,
        target=system.target,
        shock_names=list(system.shock_names),
    )


def initialize_state(
    system: SULPSystem, hyper: HyperParams, config: SamplerConfig
) -> ChainState:
    """Ridge-based starting values inside the support of every prior."""
    T, H = system.y.shape
    n_x = system.n_shocks
    k = system.n_controls
    y0 = np.nan_to_num(system.y, nan=0.0)

    if system.latent_shocks:
        n_m = system.n_instruments_per_shock
        x0 = np.empty((T, n_x))
        for i in range(n_x):
            block = system.m[:, i * n_m : (i + 1) * n_m]
            col = block[:, 0] if n_m == 1 else _first_principal_component(block)
            sd = col.std(ddof=1)
            x0[:, i] = col / (sd if sd > 0 else 1.0)
    else:
        x0 = system.x_obs.copy()

    w = np.column_stack([x0, system.z]) if k else x0
    coef = linalg.solve(w.T @ w + np.eye(w.shape[1]), w.T @ y0, assume_a="pos")
    beta0 = coef[:n_x]
    gamma0 = coef[n_x:]
    fitted = w @ coef
    resid = y0 - fitted
    sigma0 = resid.T @ resid / max(T, 1) + 0.1 * np.eye(H)
    y_filled = system.y.copy()
    if system.missing.size:
        rows, cols = system.missing[:, 0], system.missing[:, 1]
        y_filled[rows, cols] = fitted[rows, cols]

    kern = hyper.kernel
    xi0 = min(max(kern.m_xi, kern.xi_low * 1.0001 + 1e-12), kern.xi_high)
    vs0 = min(max(kern.m_varsigma, kern.varsigma_low), kern.varsigma_high)
    if config.flat_prior:
        flat_var = hyper.flat_prior_variance if hyper.flat_prior_variance else 10.0
        lambda2_0 = np.full((n_x, H), flat_var)
    else:
        lambda2_0 = np.ones((n_x, H))

    state = ChainState(
        beta=beta0,
        gamma=gamma0,
        sigma_u=sigma0,
        mu_beta=np.zeros((n_x, H)),
        xi=np.full(n_x, xi0),
        varsigma=np.full(n_x, vs0),
        tau2_tilde=np.ones(n_x),
        lambda2=lambda2_0,
        x=x0,
        y_filled=y_filled,
    )
    if system.latent_shocks:
        n_m = system.n_instruments_per_shock
        state.phi = np.ones((n_x, n_m))
        state.delta = np.zeros((n_x, n_m, k))
        state.sigma_nu = np.full((n_x, n_m), 0.5)
        if system.correlated_measurement_errors:
            if n_m != 1:
                raise SULPError("correlated measurement errors require one instrument per shock")
            state.sigma_nu_full = 0.5 * np.eye(n_x)
        if system.sv:
            state.logvol = np.zeros((T, n_x))
            state.rho_x = np.full(n_x, 0.9)
            state.vol_of_vol = np.full(n_x, 0.05)
    state.log_pseudo_lik = log_pseudo_likelihood(system, state)
    return state


def _allocate_storage(
    system: SULPSystem, state: ChainState, config: SamplerConfig
) -> dict[str, np.ndarray]:
    S = config.n_stored
    T, H = system.y.shape
    n_x = system.n_shocks
    store: dict[str, np.ndarray] = {
        "beta": np.empty((S, n_x, H)),
        "mu_beta": np.empty((S, n_x, H)),
        "sigma_u": np.empty((S, H, H)),
        "xi": np.empty((S, n_x)),
        "varsigma": np.empty((S, n_x)),
        "tau2_tilde": np.empty((S, n_x)),
        "lambda2": np.empty((S, n_x, H)),
        "log_pseudo_lik": np.empty(S),
    }
    if config.store_gamma and system.n_controls:
        store["gamma"] = np.empty((S, system.n_controls, H))
    if system.missing.size:
        store["y_missing"] = np.empty((S, system.missing.shape[0]))
    if system.latent_shocks and config.store_latent:
        n_m = system.n_instruments_per_shock
        store["x"] = np.empty((S, T, n_x))
        store["phi"] = np.empty((S, n_x, n_m))
        store["sigma_nu"] = np.empty((S, n_x, n_m))
        if system.correlated_measurement_errors:
            store["sigma_nu_full"] = np.empty((S, n_x, n_x))
        if system.sv:
            store["logvol"] = np.empty((S, T, n_x))
            store["rho_x"] = np.empty((S, n_x))
            store["vol_of_vol"] = np.empty((S, n_x))
    return store


def _store_draw(
    store: dict[str, np.ndarray], idx: int, system: SULPSystem, state: ChainState
) -> None:
    store["beta"][idx] = state.beta
    store["mu_beta"][idx] = state.mu_beta
    store["sigma_u"][idx] = state.sigma_u
    store["xi"][idx] = state.xi
    store["varsigma"][idx] = state.varsigma
    store["tau2_tilde"][idx] = state.tau2_tilde
    store["lambda2"][idx] = state.lambda2
    store["log_pseudo_lik"][idx] = state.log_pseudo_lik
    if "gamma" in store:
        store["gamma"][idx] = state.gamma
    if "y_missing" in store:
        rows, cols = system.missing[:, 0], system.missing[:, 1]
        store["y_missing"][idx] = state.y_filled[rows, cols]
    if "x" in store:
        store["x"][idx] = state.x
        store["phi"][idx] = state.phi
        store["sigma_nu"][idx] = state.sigma_nu
    if "sigma_nu_full" in store:
        store["sigma_nu_full"][idx] = state.sigma_nu_full
    if "logvol" in store:
        store["logvol"][idx] = state.logvol
        store["rho_x"][idx] = state.rho_x
        store["vol_of_vol"][idx] = state.vol_of_vol


# ---------------------------------------------------------------------------
# helpers


def _spd_inverse(matrix: np.ndarray) -> np.ndarray:
    cf = linalg.cho_factor(matrix, lower=True)
    return linalg.cho_solve(cf, np.eye(matrix.shape[0]))


def _loading_matrix(phi: np.ndarray, n_x: int, n_m: int) -> np.ndarray:
    block = np.zeros((n_x * n_m, n_x))
    for i in range(n_x):
        block[i * n_m : (i + 1) * n_m, i] = phi[i]
    return block


def _measurement_precision(state: ChainState, n_x: int, n_m: int) -> np.ndarray:
    if state.sigma_nu_full is not None:
        return _spd_inverse(state.sigma_nu_full)
    return np.diag(1.0 / state.sigma_nu.reshape(-1))


def _fitted_instrument_controls(system: SULPSystem, state: ChainState) -> np.ndarray:
    out = np.zeros_like(system.m)
    if not system.n_controls:
        return out
    n_m = system.n_instruments_per_shock
    for i in range(system.n_shocks):
        for j in range(n_m):
            out[:, i * n_m + j] = system.z @ state.delta[i, j]
    return out


def _first_principal_component(block: np.ndarray) -> np.ndarray:
    centered = block - block.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    pc = centered @ vt[0]
    if pc @ block[:, 0] < 0:  # sign convention: align with the first instrument
        pc = -pc
    return pc


def _draw_inverse_gamma(shape: float, rate: float, rng: np.random.Generator) -> float:
    return float(rate / rng.gamma(shape, 1.0))
