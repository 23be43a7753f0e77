"""The weighted arc σ: ∫f dσ = ∫_{−1/2}^{1/2} f(x, √(1−x²)) dx.

Its transform decays like |ξ|^{−1/2} by stationary phase, and the exponentials indexed by
ℤ × {0} are orthonormal in L²(σ) because σ projects to Lebesgue measure on [−1/2, 1/2].
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import toeplitz

from config import config
from services.core_measure import FourierProfile, FitError, fit_decay_exponent
from utils.logging_config import log_performance
from utils.rng import make_rng

logger = logging.getLogger(__name__)

_COARSE = leggauss(10)
_FINE = leggauss(20)
MAX_PANELS = 1 << 24
# panels with a larger phase second difference are split regardless of the error estimate
CURVATURE_TRIGGER = math.pi


class ArcBudgetError(Exception):
    """Frequency or panel budget exceeded"""
    pass


@dataclass
class ArcEvaluation:
    xi1: float
    xi2: float
    value: complex
    error_bound: float
    panels: int = 0
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {"xi": [self.xi1, self.xi2], "value": [self.value.real, self.value.imag],
                "error_bound": self.error_bound, "panels": self.panels, "flags": self.flags}


def _phase(x: np.ndarray, xi1: float, xi2: float) -> np.ndarray:
    return 2.0 * np.pi * (x * xi1 + np.sqrt(1.0 - x * x) * xi2)


def _panel_sums(a: np.ndarray, b: np.ndarray, rule, xi1: float, xi2: float) -> np.ndarray:
    t, w = rule
    half = 0.5 * (b - a)
    x = 0.5 * (a + b)[:, None] + half[:, None] * t[None, :]
    return np.exp(-1j * _phase(x, xi1, xi2)) @ w * half


def arc_fourier(xi1: float, xi2: float, tol: Optional[float] = None,
                max_depth: Optional[int] = None) -> ArcEvaluation:
    """σ̂(ξ) by adaptive panel bisection.

    Start from panels of about one oscillation; a panel is accepted when its 10- and 20-point
    Gauss–Legendre sums agree within its share of ``tol`` and the phase is not strongly curved
    across it; otherwise it is bisected.
    """
    tol = config.ARC_TOL if tol is None else tol
    max_depth = config.ARC_MAX_DEPTH if max_depth is None else max_depth
    if tol < 1e-12:
        raise ValueError("tol must be at least 1e-12")
    if math.hypot(xi1, xi2) > config.ARC_MAX_FREQUENCY:
        raise ArcBudgetError(f"|ξ| = {math.hypot(xi1, xi2):.3g} exceeds {config.ARC_MAX_FREQUENCY:.3g}")
    if xi1 == 0.0 and xi2 == 0.0:
        return ArcEvaluation(0.0, 0.0, complex(1.0), 0.0, 1)

    # |dφ/dx| ≤ 2π(|ξ1| + |ξ2|/√3) on [−1/2, 1/2]
    oscillations = abs(xi1) + abs(xi2) / math.sqrt(3.0)
    n0 = max(4, int(math.ceil(oscillations)))
    edges = np.linspace(-0.5, 0.5, n0 + 1)
    a, b = edges[:-1], edges[1:]
    depth = np.zeros(n0, dtype=np.int64)

    re_parts, im_parts, error, panels, flags = [], [], 0.0, 0, []
    while a.size:
        if a.size > MAX_PANELS:
            raise ArcBudgetError(f"panel budget exceeded at ξ=({xi1}, {xi2})")
        coarse = _panel_sums(a, b, _COARSE, xi1, xi2)
        fine = _panel_sums(a, b, _FINE, xi1, xi2)
        estimate = np.abs(fine - coarse)
        m = 0.5 * (a + b)
        curvature = np.abs(_phase(a, xi1, xi2) - 2.0 * _phase(m, xi1, xi2) + _phase(b, xi1, xi2))
        done = (estimate <= tol * (b - a)) & (curvature <= CURVATURE_TRIGGER)
        capped = depth >= max_depth
        if np.any(capped & ~done):
            flags.append("depth_limit")
        done |= capped
        re_parts.append(math.fsum(fine[done].real))
        im_parts.append(math.fsum(fine[done].imag))
        error += float(estimate[done].sum())
        panels += int(done.sum())
        keep = ~done
        a, b, m, depth = a[keep], b[keep], m[keep], depth[keep]
        a, b = np.concatenate((a, m)), np.concatenate((m, b))
        depth = np.concatenate((depth, depth)) + 1
    return ArcEvaluation(xi1, xi2, complex(math.fsum(re_parts), math.fsum(im_parts)), error, panels,
                         sorted(set(flags)))


def substitution_oracle(xi1: float, xi2: float, panels_per_unit: int = 8, nodes: int = 20) -> complex:
    """∫_{π/3}^{2π/3} e^{−2πi(ξ1 cos θ + ξ2 sin θ)} sin θ dθ, composite Gauss–Legendre."""
    lo, hi = math.pi / 3.0, 2.0 * math.pi / 3.0
    count = max(64, int(math.ceil(panels_per_unit * (abs(xi1) + abs(xi2)))))
    edges = np.linspace(lo, hi, count + 1)
    t, w = leggauss(nodes)
    half = 0.5 * (edges[1:] - edges[:-1])
    theta = 0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * t[None, :]
    integrand = np.exp(-2j * np.pi * (xi1 * np.cos(theta) + xi2 * np.sin(theta))) * np.sin(theta)
    sums = integrand @ w * half
    return complex(math.fsum(sums.real), math.fsum(sums.imag))


@dataclass
class DecayScan:
    profile: FourierProfile
    sup_constant: float
    sup_history: List[float]
    stabilized: bool
    direction_max: List[float]

    def to_dict(self) -> Dict:
        return {"profile": self.profile.to_dict(), "sup_constant": self.sup_constant,
                "sup_history": self.sup_history, "stabilized": self.stabilized,
                "direction_max": self.direction_max}


def decay_scan(R_max: float, samples: int, seed: int, sectors: int = 16, tol: float = 1e-8) -> DecayScan:
    """Jittered radial and angular sampling per dyadic band up to R_max.

    Tracks the running sup of |ξ|^{1/2}|σ̂(ξ)| after each band and the max per angular sector.
    """
    if R_max > 1e5:
        raise ArcBudgetError("R_max must not exceed 1e5")
    started = time.time()
    top = int(math.floor(math.log2(R_max)))
    bands, history = [], []
    direction_max = np.zeros(sectors)
    sup = 0.0
    for m in range(0, top):
        rng = make_rng(seed, "arc", m)
        strata = (np.arange(samples) + rng.random(samples)) / samples
        radius = 2.0 ** m * (1.0 + rng.random(samples))
        angle = 2.0 * np.pi * strata
        envelope = 0.0
        for rho, theta in zip(radius, angle):
            value = abs(arc_fourier(rho * math.cos(theta), rho * math.sin(theta), tol).value)
            envelope = max(envelope, value)
            scaled = math.sqrt(rho) * value
            sup = max(sup, scaled)
            sector = int(theta / (2.0 * np.pi) * sectors) % sectors
            direction_max[sector] = max(direction_max[sector], scaled)
        bands.append((m, envelope))
        history.append(sup)

    profile = FourierProfile(bands=bands, sampling="jittered", samples_per_band=samples, seed=seed, tag="arc")
    try:
        fit_decay_exponent(profile, discard_low_bands=2)
    except FitError:
        profile.flags.append("degenerate_fit")
    stabilized = len(history) >= 2 and history[-1] <= 1.02 * history[-2]
    if not stabilized:
        logger.warning(f"Arc sup |ξ|^(1/2)|σ̂| still moving: {history[-2:]}")
    log_performance("arc_decay_scan", time.time() - started, construction="arc", seed=seed)
    return DecayScan(profile, sup, history, stabilized, direction_max.tolist())


def gram_onb(K: int, tol: float = 1e-12) -> Dict:
    """Gram matrix of e_k, |k| ≤ K, in L²(σ); Toeplitz with entries σ̂((k−k′), 0)."""
    if K > 512:
        raise ValueError("K must not exceed 512")
    column = np.array([arc_fourier(float(m), 0.0, tol).value for m in range(2 * K + 1)])
    gram = toeplitz(column, column.conj())
    off = np.abs(gram - np.diag(np.diag(gram)))
    return {"K": K, "max_off_diagonal": float(off.max()), "diagonal": float(np.abs(np.diag(gram)).max()),
            "toeplitz": True}
