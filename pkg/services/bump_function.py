"""The fixed even C^∞ bump φ_0 and its Fourier transform.

φ_0 = c²·(b * b) with b(x) = exp(−1/(1 − 4x²)) on (−1/2, 1/2). It is supported in
(−1, 1), decreasing in |x|, and c is fixed so that φ_0(±1/2) = 1/2, hence φ_0 ≥ 1/2 on
[−1/2, 1/2]. Its transform is c²·b̂², nonnegative and of faster-than-polynomial decay.

Both sides are tabulated once (Gauss–Legendre quadrature) and interpolated with cubic
splines; the tables are cached for the life of the process.
"""

import logging
from dataclasses import dataclass

import numpy as np
from cachetools import cached, LRUCache
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

logger = logging.getLogger(__name__)

# transform is treated as 0 beyond this frequency (|b̂|² < 1e-40 there)
PHI0_HAT_CUTOFF = 512.0
_X_STEP = 2.0 ** -14
_XI_STEP = 1.0 / 256.0
_CONV_NODES = 256
_FT_NODES = 1024


def bump(x) -> np.ndarray:
    """b(x) = exp(−1/(1 − 4x²)) for |x| < 1/2, else 0."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 0.5
    u = np.where(inside, 1.0 - 4.0 * x * x, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        return np.where(inside, np.exp(-1.0 / u), 0.0)


def _gauss_on(a: np.ndarray, b: np.ndarray, n: int):
    """Nodes (rows) and weights for ∫_a^b, vectorized over interval arrays."""
    t, w = leggauss(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * t[None, :]
    weights = half[:, None] * w[None, :]
    return nodes, weights


def _self_convolution(x: np.ndarray) -> np.ndarray:
    """(b * b)(x) for 0 ≤ x < 1."""
    lo = x - 0.5
    hi = np.full_like(x, 0.5)
    nodes, weights = _gauss_on(lo, hi, _CONV_NODES)
    vals = bump(nodes) * bump(x[:, None] - nodes)
    return np.sum(vals * weights, axis=1)


def _bump_transform(xi: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """b̂(ξ) = 2∫_0^{1/2} b(x) cos(2πξx) dx."""
    t, w = leggauss(_FT_NODES)
    x = 0.25 * (t + 1.0)
    wx = 0.25 * w * bump(x)
    out = np.empty_like(xi)
    for start in range(0, xi.size, chunk):
        block = xi[start:start + chunk]
        out[start:start + chunk] = 2.0 * np.cos(2.0 * np.pi * np.outer(block, x)) @ wx
    return out


@dataclass(frozen=True)
class BumpTables:
    """Spline tables for φ_0, b̂ and the normalized cumulative of b."""
    c_squared: float
    bump_mass: float
    phi0_spline: CubicSpline
    bump_hat_spline: CubicSpline
    step_spline: CubicSpline


@cached(cache=LRUCache(maxsize=1))
def bump_tables() -> BumpTables:
    """Build (once) the interpolation tables."""
    x = np.arange(0.0, 1.0 + _X_STEP / 2, _X_STEP)
    conv = np.zeros_like(x)
    conv[:-1] = _self_convolution(x[:-1])
    half_value = float(_self_convolution(np.array([0.5]))[0])
    c_squared = 1.0 / (2.0 * half_value)

    xi = np.arange(0.0, PHI0_HAT_CUTOFF + _XI_STEP / 2, _XI_STEP)
    b_hat = _bump_transform(xi)
    bump_mass = float(b_hat[0])

    # cumulative of b over [−1/2, 1/2], normalized; parametrized by u = x + 1/2 ∈ [0, 1]
    u = np.linspace(0.0, 1.0, 1 << 14 | 1)
    density = bump(u - 0.5)
    cdf = cumulative_trapezoid(density, u, initial=0.0)
    cdf /= cdf[-1]

    logger.info(f"Bump tables built: c²={c_squared:.6f}, ∫b={bump_mass:.6f}")
    return BumpTables(
        c_squared=c_squared,
        bump_mass=bump_mass,
        phi0_spline=CubicSpline(x, c_squared * conv),
        bump_hat_spline=CubicSpline(xi, b_hat),
        step_spline=CubicSpline(u, cdf),
    )


def phi0(x) -> np.ndarray:
    """φ_0(x); zero outside (−1, 1)."""
    tables = bump_tables()
    ax = np.abs(np.asarray(x, dtype=float))
    vals = np.maximum(tables.phi0_spline(np.minimum(ax, 1.0)), 0.0)
    return np.where(ax < 1.0, vals, 0.0)


def phi0_hat(xi) -> np.ndarray:
    """φ̂_0(ξ) = c²·b̂(ξ)², real, even, ≥ 0."""
    tables = bump_tables()
    axi = np.abs(np.asarray(xi, dtype=float))
    vals = tables.c_squared * tables.bump_hat_spline(np.minimum(axi, PHI0_HAT_CUTOFF)) ** 2
    return np.where(axi <= PHI0_HAT_CUTOFF, vals, 0.0)


def smooth_step(u) -> np.ndarray:
    """C^∞ step: 0 for u ≤ 0, 1 for u ≥ 1, monotone in between."""
    tables = bump_tables()
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return np.clip(tables.step_spline(u), 0.0, 1.0)
