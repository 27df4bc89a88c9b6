"""Generalized inverse Gaussian random variates.

Density (up to a constant): x^(nu - 1) * exp(-(chi / x + psi * x) / 2) on
x > 0. Sampling follows the Hoermann-Leydold ratio-of-uniforms generators
with their three parameter regimes, after reducing to the two-parameter form
via x = sqrt(chi / psi) * y with omega = sqrt(chi * psi); negative orders are
handled by inverting a draw with the order negated. Degenerate boundary
cases fall back to the gamma (chi = 0) and inverse-gamma (psi = 0) laws.
"""

from __future__ import annotations

import math

import numpy as np

from sulp.errors import NumericalError

_MAX_REJECTION_ITER = 10_000


def sample_gig(nu: float, chi: float, psi: float, rng: np.random.Generator) -> float:
    """One draw from GIG(nu, chi, psi)."""
    if chi < 0 or psi < 0:
        raise ValueError("chi and psi must be nonnegative")
    if chi == 0.0:
        if nu <= 0 or psi <= 0:
            raise ValueError("chi=0 requires nu > 0 and psi > 0")
        return float(rng.gamma(nu, 2.0 / psi))
    if psi == 0.0:
        if nu >= 0:
            raise ValueError("psi=0 requires nu < 0 and chi > 0")
        return float(chi / (2.0 * rng.gamma(-nu, 1.0)))

    lam = abs(nu)
    omega = math.sqrt(chi * psi)
    eta = math.sqrt(chi / psi)
    y = _sample_two_param(lam, omega, rng)
    if nu < 0:
        y = 1.0 / y
    return eta * y


def gig_mean(nu: float, chi: float, psi: float) -> float:
    """E[X] via the Bessel-function ratio sqrt(chi/psi) K_{nu+1} / K_nu."""
    from scipy.special import kve

    omega = math.sqrt(chi * psi)
    return math.sqrt(chi / psi) * kve(nu + 1.0, omega) / kve(nu, omega)


def gig_second_moment(nu: float, chi: float, psi: float) -> float:
    """E[X^2] via (chi/psi) K_{nu+2} / K_nu."""
    from scipy.special import kve

    omega = math.sqrt(chi * psi)
    return (chi / psi) * kve(nu + 2.0, omega) / kve(nu, omega)


def _sample_two_param(lam: float, omega: float, rng: np.random.Generator) -> float:
    """Draw from density prop. to y^(lam-1) exp(-omega (y + 1/y) / 2), lam >= 0."""
    if lam >= 1.0 or omega > 1.0:
        return _rou_shift(lam, omega, rng)
    if omega >= min(0.5, (2.0 / 3.0) * math.sqrt(1.0 - lam)):
        return _rou_noshift(lam, omega, rng)
    return _rejection_decomposition(lam, omega, rng)


def _log_g(y: float, lam: float, omega: float) -> float:
    return (lam - 1.0) * math.log(y) - 0.5 * omega * (y + 1.0 / y)


def _mode(lam: float, omega: float) -> float:
    if lam >= 1.0:
        return (math.sqrt((lam - 1.0) ** 2 + omega**2) + (lam - 1.0)) / omega
    # rationalized form, stable for small omega
    return omega / (math.sqrt((1.0 - lam) ** 2 + omega**2) + (1.0 - lam))


def _rou_shift(lam: float, omega: float, rng: np.random.Generator) -> float:
    """Ratio-of-uniforms with the region shifted to the density mode."""
    ym = _mode(lam, omega)
    nc = _log_g(ym, lam, omega)
    # locations of the extrema of (y - ym) * sqrt(g(y)): roots of a cubic
    a = -(2.0 * (lam + 1.0) / omega + ym)
    b = 2.0 * (lam - 1.0) * ym / omega - 1.0
    c = ym
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    if p >= 0.0:
        raise NumericalError("GIG bounding cubic has no real extrema")
    det = -(p**3) / 27.0
    fi = math.acos(min(1.0, max(-1.0, -q / (2.0 * math.sqrt(det)))))
    fak = 2.0 * math.sqrt(-p / 3.0)
    y_plus = fak * math.cos(fi / 3.0) - a / 3.0
    y_minus = fak * math.cos(fi / 3.0 + 4.0 * math.pi / 3.0) - a / 3.0
    u_plus = (y_plus - ym) * math.exp(0.5 * (_log_g(y_plus, lam, omega) - nc))
    u_minus = (y_minus - ym) * math.exp(0.5 * (_log_g(y_minus, lam, omega) - nc))

    for _ in range(_MAX_REJECTION_ITER):
        u = u_minus + rng.random() * (u_plus - u_minus)
        v = rng.random()
        if v <= 0.0:
            continue
        y = u / v + ym
        if y <= 0.0:
            continue
        if 2.0 * math.log(v) <= _log_g(y, lam, omega) - nc:
            return y
    raise NumericalError("GIG ratio-of-uniforms (shifted) did not accept")


def _rou_noshift(lam: float, omega: float, rng: np.random.Generator) -> float:
    """Plain ratio-of-uniforms; valid for moderate omega below order one."""
    ym = _mode(lam, omega)
    nc = _log_g(ym, lam, omega)
    # maximizer of y^2 g(y) bounds the u-coordinate
    yp = (math.sqrt((lam + 1.0) ** 2 + omega**2) + (lam + 1.0)) / omega
    u_plus = yp * math.exp(0.5 * (_log_g(yp, lam, omega) - nc))

    for _ in range(_MAX_REJECTION_ITER):
        u = rng.random() * u_plus
        v = rng.random()
        if v <= 0.0 or u <= 0.0:
            continue
        y = u / v
        if 2.0 * math.log(v) <= _log_g(y, lam, omega) - nc:
            return y
    raise NumericalError("GIG ratio-of-uniforms did not accept")


def _rejection_decomposition(lam: float, omega: float, rng: np.random.Generator) -> float:
    """Piecewise hat for small omega and 0 <= lam < 1.

    The hat is constant at the density maximum on (0, y0], proportional to
    y^(lam-1) on (y0, 2/omega] (where exp(-omega (y + 1/y) / 2) <= e^-omega),
    and an exponential tail beyond; each piece dominates the density.
    """
    ym = _mode(lam, omega)
    y0 = omega / (1.0 - lam)
    g_max = math.exp(_log_g(ym, lam, omega))

    a0 = g_max * y0
    if y0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        split = y0
        k2 = y0 ** (lam - 1.0)
    else:
        k1 = math.exp(-omega)
        if lam == 0.0:
            a1 = k1 * math.log(2.0 / (omega * y0))
        else:
            a1 = (k1 / lam) * ((2.0 / omega) ** lam - y0**lam)
        split = 2.0 / omega
        k2 = (2.0 / omega) ** (lam - 1.0)
    a2 = k2 * (2.0 / omega) * math.exp(-0.5 * omega * split)
    total = a0 + a1 + a2

    for _ in range(_MAX_REJECTION_ITER):
        slot = rng.random() * total
        if slot <= a0:
            y = y0 * slot / a0
            hat = g_max
        elif slot <= a0 + a1:
            r = slot - a0
            if lam == 0.0:
                y = y0 * math.exp(r / k1)
            else:
                y = (y0**lam + r * lam / k1) ** (1.0 / lam)
            hat = k1 * y ** (lam - 1.0)
        else:
            r = slot - a0 - a1
            y = split - (2.0 / omega) * math.log1p(-r / a2) if r < a2 else split
            y = max(y, split)
            hat = k2 * math.exp(-0.5 * omega * y)
        if y <= 0.0 or not math.isfinite(y):
            continue
        u = rng.random()
        if u <= 0.0:
            continue
        if math.log(u) + math.log(hat) <= _log_g(y, lam, omega):
            return y
    raise NumericalError("GIG decomposition rejection did not accept")
