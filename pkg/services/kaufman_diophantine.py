"""Kaufman-type measures from prime-periodized bumps.

A level-i factor averages, over a prime set P_i, the 1/p-periodization of q_i·φ(q_i x)/p,
so its Fourier coefficients are divisor counts times φ̂(k/q_i). The target measure μ uses
{1} ∪ {p ≤ q_i^{s/2}/2}; the auxiliary measure ν uses primes in [q_i^{s/2}/h(i), q_i^{s/2}/2]
and drops the translates at multiples of p, which makes all its bumps disjoint. Both are
truncated to a finite number of levels, multiplied by the outer window 2φ(2x).

All coefficient work is exact integer arithmetic (divisor counts) times closed-form φ̂;
products are computed by discrete convolution of coefficient windows.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from cachetools import cached, LRUCache
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from config import config
from services.bump_function import phi0, phi0_hat
from utils.logging_config import log_performance
from utils.rng import make_rng

logger = logging.getLogger(__name__)

# φ̂(ξ) ≤ TAIL_SAFETY·C4·|ξ|^{−4} for |ξ| ≥ 16, with C4 the asymptotic constant
TAIL_SAFETY = 1.25
AVERAGING_EXPONENT = 0.9


class CalibrationError(Exception):
    """φ or C_s calibration could not satisfy its invariants"""

    def __init__(self, message: str, witness: Optional[float] = None):
        super().__init__(message)
        self.witness = witness


class TruncationBudgetError(Exception):
    """Requested coefficient window exceeds the configured budget"""
    pass


class PrimeSetError(Exception):
    """Prime set empty for the requested parameters"""
    pass


class ComparisonViolation(Exception):
    """Pointwise comparison between the ν and μ factors failed"""

    def __init__(self, message: str, witness: Optional[float] = None):
        super().__init__(message)
        self.witness = witness


# ─────────────────────────────
# The auxiliary function φ
# ─────────────────────────────
def _h(x) -> np.ndarray:
    """χ*χ + φ_2*φ_2^- = 4/3 − 2|x| + (2/3)|x|³ on [−1, 1]."""
    ax = np.abs(np.asarray(x, dtype=float))
    return np.where(ax <= 1.0, 4.0 / 3.0 - 2.0 * ax + (2.0 / 3.0) * ax ** 3, 0.0)


def _h_hat(zeta) -> np.ndarray:
    """sinc²(ζ) + ((πζ cos πζ − sin πζ)/(πζ)²)²."""
    z = np.pi * np.asarray(zeta, dtype=float)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    odd = np.where(small, -z / 3.0 + z ** 3 / 30.0, (safe * np.cos(safe) - np.sin(safe)) / safe ** 2)
    return np.sinc(np.asarray(zeta, dtype=float)) ** 2 + odd ** 2


def _hh(y) -> np.ndarray:
    """(h*h)(y), exact: piecewise Gauss–Legendre on the polynomial pieces."""
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    lo = np.maximum(-1.0, flat - 1.0)
    hi = np.minimum(1.0, flat + 1.0)
    inside = lo < hi
    b1 = np.clip(np.minimum(0.0, flat), lo, hi)
    b2 = np.clip(np.maximum(0.0, flat), lo, hi)
    t, w = leggauss(8)
    out = np.zeros_like(flat)
    for a, b in ((lo, b1), (b1, b2), (b2, hi)):
        half = 0.5 * (b - a)
        u = 0.5 * (a + b)[:, None] + half[:, None] * t[None, :]
        out += np.sum(_h(u) * _h(flat[:, None] - u) * w[None, :], axis=1) * half
    return np.where(inside, out, 0.0).reshape(y.shape)


@dataclass(frozen=True)
class AuxPhi:
    """φ = A1·φ_0 + A2·(h*h)(4x) and its transform."""
    A1: float
    A2: float
    sup_norm: float
    report: Dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def asymptotic_constant(self) -> float:
        """lim ξ⁴φ̂(ξ) = A2·64/π⁴."""
        return self.A2 * 64.0 / np.pi ** 4

    def phi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A1 * phi0(x) + self.A2 * _hh(4.0 * x)

    def phi_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self.A1 * phi0_hat(xi) + 0.25 * self.A2 * _h_hat(xi / 4.0) ** 2

    def phi1_hat(self, xi) -> np.ndarray:
        return np.sinc(np.asarray(xi, dtype=float))

    def phi2_hat(self, xi) -> np.ndarray:
        """i(πξ cos πξ − sin πξ)/(π²ξ²)."""
        z = np.pi * np.asarray(xi, dtype=float)
        return 1j * (z * np.cos(z) - np.sin(z)) / z ** 2

    def tail_bound(self, q: float, W: float) -> float:
        """Σ_{|k|>W} φ̂(k/q) for W ≥ 16q."""
        return 2.0 * TAIL_SAFETY * self.asymptotic_constant * q ** 4 / (3.0 * W ** 3)

    def tail_radius(self, q: float, tol: float) -> int:
        """Smallest integer W ≥ 16q with tail_bound(q, W) ≤ tol."""
        W = q * (2.0 * TAIL_SAFETY * self.asymptotic_constant / (3.0 * tol)) ** (1.0 / 3.0)
        return int(math.ceil(max(W, 16.0 * q)))


def _calibration_report(phi: AuxPhi) -> Dict:
    x = np.linspace(-1.0, 1.0, (1 << 16) + 1)
    values = phi.phi(x)
    xi = np.arange(0.0, 1e4 + 0.125, 0.25)
    hat = phi.phi_hat(xi)
    ratios = []
    for r in (-1.0, -0.5, 0.5, 1.0):
        shifted = phi.phi_hat(xi + r)
        ratios.append(np.max(np.maximum(shifted / hat, hat / shifted)))
    weight = (1.0 + xi) ** 4
    t, w = leggauss(512)
    # ∫φ over [−1, 1] split at 0 and ±1/2 where the pieces change
    mass = 0.0
    for a, b in ((-1.0, -0.5), (-0.5, 0.0), (0.0, 0.5), (0.5, 1.0)):
        u = 0.5 * (a + b) + 0.5 * (b - a) * t
        mass += 0.5 * (b - a) * float(phi.phi(u) @ w)
    return {
        "min_phi": float(values.min()),
        "argmin_phi": float(x[np.argmin(values)]),
        "edge_value": float(abs(phi.phi(np.array([1.0]))[0])),
        "min_phi_hat": float(hat.min()),
        "argmin_phi_hat": float(xi[np.argmin(hat)]),
        "shift_ratio": float(max(ratios)),
        "quartic_lower": float(np.min(hat * weight)),
        "quartic_upper": float(np.max(hat * weight)),
        "integral": float(phi.phi_hat(np.array([0.0]))[0]),
        "integral_quadrature": mass,
        "asymptotic_ratio": float((np.pi * 1e4 / 4.0) ** 4 * phi.phi_hat(np.array([1e4]))[0] / (phi.A2 / 4.0)),
    }


@cached(cache=LRUCache(maxsize=1))
def build_phi() -> AuxPhi:
    """Calibrate A1, A2: A2 = 1, double A1 until φ ≥ 0 on the grid, then normalize ∫φ = 1."""
    x = np.linspace(-1.0, 1.0, (1 << 16) + 1)
    A1, A2 = 1.0, 1.0
    for _ in range(32):
        values = A1 * phi0(x) + A2 * _hh(4.0 * x)
        if values.min() >= 0.0:
            break
        A1 *= 2.0
    else:
        raise CalibrationError("φ stays negative", witness=float(x[np.argmin(values)]))

    mass = A1 * float(phi0_hat(np.array([0.0]))[0]) + 0.25 * A2
    A1, A2 = A1 / mass, A2 / mass
    sup_norm = float(A1 * phi0(np.array([0.0]))[0] + A2 * _hh(np.array([0.0]))[0])
    phi = AuxPhi(A1, A2, sup_norm)
    report = _calibration_report(phi)

    if report["min_phi"] < 0.0:
        raise CalibrationError("φ negative on grid", witness=report["argmin_phi"])
    if report["min_phi_hat"] <= 0.0:
        raise CalibrationError("φ̂ not positive on grid", witness=report["argmin_phi_hat"])
    if abs(report["integral"] - 1.0) > 1e-8:
        raise CalibrationError(f"∫φ = {report['integral']}")
    logger.info(f"φ calibrated: A1={A1:.6f}, A2={A2:.6f}, ‖φ‖∞={sup_norm:.4f}")
    return AuxPhi(A1, A2, sup_norm, report)


# ─────────────────────────────
# Parameters and prime sets
# ─────────────────────────────
def simple_sieve(limit: int) -> np.ndarray:
    """Primes ≤ limit (sieve of Eratosthenes)."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, int(math.isqrt(limit)) + 1):
        if is_prime[p]:
            is_prime[p * p::p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


@dataclass(frozen=True)
class KaufmanParams:
    s: float
    q: Tuple[float, ...]
    C_s: float
    calibration_met: bool = True
    flags: Tuple[str, ...] = ()

    def h(self, i: int) -> float:
        return self.C_s * math.log(self.q[i - 1])

    def scale(self, i: int) -> float:
        """q_i^{s/2}."""
        return self.q[i - 1] ** (self.s / 2.0)

    def threshold(self, i: int) -> float:
        """x_i = q_i^{s/2}/h(i), the lower end of P^ν_i."""
        return self.scale(i) / self.h(i)

    def to_dict(self) -> Dict:
        return {"s": self.s, "q": list(self.q), "C_s": self.C_s,
                "calibration_met": self.calibration_met, "flags": list(self.flags)}


def prime_sets(params: KaufmanParams) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """(P^μ_i, P^ν_i) for every level; P^μ_i includes 1."""
    mu_sets, nu_sets = [], []
    for i in range(1, len(params.q) + 1):
        top = params.scale(i) / 2.0
        primes = simple_sieve(int(math.floor(top)))
        if primes.size == 0:
            logger.warning(f"level {i}: q^(s/2)/2 = {top:.3f} < 2, P^mu = {{1}} only")
        mu_sets.append(np.concatenate(([1], primes)).astype(np.int64))
        nu = primes[primes >= params.threshold(i)]
        if nu.size == 0:
            raise PrimeSetError(f"level {i}: no primes in [{params.threshold(i):.3f}, {top:.3f}]")
        nu_sets.append(nu)
    return mu_sets, nu_sets


def comparison_factor(params: KaufmanParams, i: int, mu_set: np.ndarray, nu_set: np.ndarray) -> float:
    """(x/(x−1))·(#P^μ/#P^ν) with x = q_i^{s/2}/h(i); inf when x ≤ 1."""
    x = params.threshold(i)
    if x <= 1.0:
        return math.inf
    return x / (x - 1.0) * mu_set.size / nu_set.size


def calibrate_cs(s: float, q: Sequence[float], bound: float = 4.0) -> KaufmanParams:
    """Smallest power of two C_s ∈ {1..64} with P^ν nonempty and factor product ≤ bound."""
    best: Optional[Tuple[float, float]] = None
    for C_s in (2.0 ** e for e in range(7)):
        params = KaufmanParams(s, tuple(q), C_s)
        try:
            mu_sets, nu_sets = prime_sets(params)
        except PrimeSetError:
            continue
        product = math.prod(comparison_factor(params, i + 1, m, n)
                            for i, (m, n) in enumerate(zip(mu_sets, nu_sets)))
        if product <= bound:
            logger.info(f"C_s calibrated to {C_s} (factor product {product:.4f})")
            return params
        if best is None or product < best[1]:
            best = (C_s, product)
    if best is None:
        raise CalibrationError(f"no C_s ≤ 64 gives nonempty P^nu for s={s}, q={list(q)}")
    logger.warning(f"C_s calibration not met for s={s}; best C_s={best[0]} (product {best[1]})")
    return KaufmanParams(s, tuple(q), best[0], calibration_met=False, flags=("cs_calibration_not_met",))


def make_params(s: float, q: Optional[Sequence[float]] = None, C_s: Optional[float] = None) -> KaufmanParams:
    """Explicit C_s when given (nonzero), otherwise calibrated."""
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    q = tuple(float(v) for v in (q if q is not None else config.KAUFMAN_Q))
    C_s = config.KAUFMAN_CS if C_s is None else C_s
    flags = ("desk_scale_q",) if len(q) > 1 and q[1] < q[0] ** 10 else ()
    if C_s and C_s > 0:
        return KaufmanParams(s, q, float(C_s), flags=flags)
    params = calibrate_cs(s, q)
    return KaufmanParams(params.s, params.q, params.C_s, params.calibration_met, params.flags + flags)


# ─────────────────────────────
# Coefficients
# ─────────────────────────────
def _divisor_stats(ks: np.ndarray, primes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per k: #{p | k} and Σ_{p | k} 1/(p−1) (the second only over p > 1)."""
    counts = np.zeros(ks.size, dtype=np.int64)
    recip = np.zeros(ks.size)
    contiguous = ks.size > 1 and np.all(np.diff(ks) == 1)
    for p in primes.tolist():
        if p == 1:
            counts += 1
            continue
        if contiguous:
            start = (-int(ks[0])) % p
            counts[start::p] += 1
            recip[start::p] += 1.0 / (p - 1)
        else:
            hit = ks % p == 0
            counts += hit
            recip += hit / (p - 1)
    return counts, recip


def level_coeffs(ks, q: float, primes: np.ndarray, variant: str, phi: AuxPhi) -> np.ndarray:
    """F̂_i(k) for integer k (vectorized)."""
    ks = np.asarray(ks, dtype=np.int64).ravel()
    counts, recip_divisors = _divisor_stats(ks, primes)
    hat = phi.phi_hat(ks / q)
    if variant == "mu":
        out = counts / primes.size * hat
    elif variant == "nu":
        total_recip = float(np.sum(1.0 / (primes - 1.0)))
        out = (counts - (total_recip - recip_divisors)) / primes.size * hat
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return np.where(ks == 0, 1.0, out)


def _sets_for(params: KaufmanParams, variant: str):
    mu_sets, nu_sets = prime_sets(params)
    return mu_sets if variant == "mu" else nu_sets


def coeff_F(i: int, variant: str, k: int, params: KaufmanParams, phi: Optional[AuxPhi] = None) -> float:
    """Fourier coefficient of the level-i factor at integer k."""
    phi = phi or build_phi()
    primes = _sets_for(params, variant)[i - 1]
    return float(level_coeffs(np.array([k]), params.q[i - 1], primes, variant, phi)[0])


@dataclass
class CoeffSequence:
    """Coefficients on the symmetric window |k| ≤ K_max."""
    tag: str
    K_max: int
    values: np.ndarray
    tail_bound: float
    flags: List[str] = field(default_factory=list)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K_max, self.K_max + 1, dtype=np.int64)

    def at(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        if np.any(np.abs(k) > self.K_max):
            raise TruncationBudgetError(f"|k| beyond window {self.K_max}")
        return self.values[k + self.K_max]

    def to_dict(self) -> Dict:
        return {"tag": self.tag, "K_max": self.K_max, "tail_bound": self.tail_bound, "flags": self.flags,
                "min_value": float(self.values.min()), "value_at_zero": float(self.values[self.K_max])}


@dataclass
class KaufmanProduct:
    """Periodic part Π_{1≤i≤n} F_i as coefficients, with the outer window 2φ(2x) applied on demand."""
    n: int
    variant: str
    params: KaufmanParams
    phi: AuxPhi
    periodic: CoeffSequence
    outer_radius: int
    tail_bound: float

    def transform(self, xi, chunk: int = 4096) -> np.ndarray:
        """μ̂_n(ξ) = Σ_l φ̂((ξ − l)/2)·P(l) for real ξ."""
        xi = np.asarray(xi, dtype=float)
        flat = xi.ravel()
        M = self.outer_radius
        offsets = np.arange(-M, M + 1, dtype=np.int64)
        out = np.empty(flat.size)
        for start in range(0, flat.size, chunk):
            block = flat[start:start + chunk]
            base = np.rint(block).astype(np.int64)
            ls = base[:, None] + offsets[None, :]
            weights = self.phi.phi_hat((block[:, None] - ls) / 2.0)
            out[start:start + chunk] = np.sum(weights * self.periodic.at(ls), axis=1)
        return out.reshape(xi.shape)

    def coefficients(self) -> CoeffSequence:
        """Integer coefficients |k| ≤ K_out; the outer window acts as a discrete convolution."""
        M = self.outer_radius
        window = self.phi.phi_hat(np.arange(-M, M + 1) / 2.0)
        values = fftconvolve(self.periodic.values, window, mode="valid")
        K_out = self.periodic.K_max - M
        return CoeffSequence(f"{self.variant}_product_n{self.n}", K_out, values, self.tail_bound)


def product_coeffs(n: int, variant: str, params: KaufmanParams, phi: Optional[AuxPhi] = None,
                   K_out: int = 1 << 17) -> KaufmanProduct:
    """Truncated product 2φ(2x)·Π_{i≤n} F_i in coefficient form, exact up to the reported tail bound.

    Levels below n are cut at their quartic tail radius; level n is evaluated on the full
    window. The outer window 2φ(2x) is applied in `transform`, cut at radius M.
    """
    if n < 0 or n > len(params.q):
        raise ValueError(f"n must lie in [0, {len(params.q)}]")
    phi = phi or build_phi()
    started = time.time()
    sets = _sets_for(params, variant)
    M = phi.tail_radius(2.0, config.KAUFMAN_TAIL_TOL)
    window = K_out + M

    if n == 0:
        values = np.zeros(2 * window + 1)
        values[window] = 1.0
        inner_tail = 0.0
    else:
        radii = [phi.tail_radius(params.q[i - 1], config.KAUFMAN_INNER_TAIL_TOL) for i in range(1, n)]
        reach = window + sum(radii)
        if reach > config.KAUFMAN_MAX_WINDOW:
            raise TruncationBudgetError(f"window {reach} exceeds budget {config.KAUFMAN_MAX_WINDOW}")
        values = np.ones(1)
        inner_tail = 0.0
        for i, R in enumerate(radii, start=1):
            factor = level_coeffs(np.arange(-R, R + 1), params.q[i - 1], sets[i - 1], variant, phi)
            values = fftconvolve(values, factor, mode="full")
            inner_tail += phi.tail_bound(params.q[i - 1], R)
        last = level_coeffs(np.arange(-reach, reach + 1), params.q[n - 1], sets[n - 1], variant, phi)
        values = fftconvolve(last, values, mode="valid")

    # outer cut scales with the largest coefficient; inner cuts are amplified by Σ_l φ̂((ξ−l)/2) ≤ 2‖φ‖∞
    tail = config.KAUFMAN_TAIL_TOL * float(np.abs(values).max()) + 2.0 * phi.sup_norm * inner_tail
    periodic = CoeffSequence(f"{variant}_periodic_n{n}", window, values, tail)
    log_performance("kaufman_product", time.time() - started, construction="kaufman", level=n)
    return KaufmanProduct(n, variant, params, phi, periodic, M, tail)


# ─────────────────────────────
# Density domain
# ─────────────────────────────
def factor_density(x, q: float, primes: np.ndarray, variant: str, phi: AuxPhi) -> np.ndarray:
    """F_i(x) from the periodized bumps (only the nearest translate of each p can be nonzero)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p in primes.tolist():
        v = np.rint(p * x)
        bump = phi.phi(q * (x - v / p))
        if variant == "mu":
            out += q / p * bump
        else:
            out += np.where(np.mod(v, p) != 0, q / (p - 1.0) * bump, 0.0)
    return out / primes.size


def product_density(n: int, variant: str, params: KaufmanParams, phi: Optional[AuxPhi] = None) -> Callable:
    """x ↦ 2φ(2x)·Π_{i≤n} F_i(x)."""
    phi = phi or build_phi()
    sets = _sets_for(params, variant)

    def density(x):
        x = np.asarray(x, dtype=float)
        out = 2.0 * phi.phi(2.0 * x)
        for i in range(1, n + 1):
            out = out * factor_density(x, params.q[i - 1], sets[i - 1], variant, phi)
        return out

    return density


# ─────────────────────────────
# Checks
# ─────────────────────────────
def stability_check(psi: str, i: int, params: KaufmanParams, phi: Optional[AuxPhi] = None,
                    K: Optional[int] = None) -> Dict:
    """max_k |(ψF_i)^(k) − ψ̂(k)| against q^{−s/2}(ln q)² (|k| ≤ q) or |k|^{−s/2}(ln|k|)² (|k| > q).

    ``psi`` is "one" (ψ ≡ 1 on the period) or "phi" (ψ = 2φ(2x)).
    """
    phi = phi or build_phi()
    q = params.q[i - 1]
    K = int(2 * q) if K is None else K
    primes = _sets_for(params, "mu")[i - 1]
    ks = np.arange(-K, K + 1, dtype=np.int64)
    if psi == "one":
        diff = level_coeffs(ks, q, primes, "mu", phi)
        diff[K] -= 1.0
    elif psi == "phi":
        single = KaufmanParams(params.s, (q,), params.C_s)
        product = product_coeffs(1, "mu", single, phi, K_out=K)
        diff = product.coefficients().at(ks) - phi.phi_hat(ks / 2.0)
    else:
        raise ValueError(f"unknown test function {psi!r}")
    abs_k = np.maximum(np.abs(ks), 2)
    norm = np.where(np.abs(ks) <= q, q ** (-params.s / 2.0) * math.log(q) ** 2,
                    abs_k ** (-params.s / 2.0) * np.log(abs_k) ** 2)
    ratios = np.abs(diff) / norm
    worst = int(np.argmax(ratios))
    return {"psi": psi, "level": i, "q": q, "K": K, "max_difference": float(np.abs(diff).max()),
            "difference_at_zero": float(abs(diff[K])), "implied_constant": float(ratios[worst]),
            "witness_k": int(ks[worst])}


def separation_check(params: KaufmanParams, i: int) -> Dict:
    """min |m/p − m'/p'| over distinct reduced translates in [−1/2, 1/2], in exact arithmetic."""
    nu = prime_sets(params)[1][i - 1]
    entries = []
    for p in nu.tolist():
        for m in range(-(p // 2) - 1, p // 2 + 2):
            if m % p:
                entries.append((m / p, m, p))
    entries.sort()
    best = None
    for (_, m1, p1), (_, m2, p2) in zip(entries, entries[1:]):
        gap = Fraction(m2 * p1 - m1 * p2, p1 * p2)
        if best is None or gap < best:
            best = gap
    bound = 4.0 * params.q[i - 1] ** (-params.s)
    return {"level": i, "min_gap": float(best), "bound": bound, "passed": float(best) > bound,
            "translates": len(entries)}


def frostman_nu(n: int, params: KaufmanParams, phi: Optional[AuxPhi] = None,
                samples_per_ball: int = 64) -> Dict:
    """Sup over balls B(x, 1/q_n) of the ν_n density integral, against the Frostman bound."""
    phi = phi or build_phi()
    q_n = params.q[n - 1]
    points = int(math.ceil(samples_per_ball * q_n / 2.0))
    if points > config.KAUFMAN_MAX_WINDOW:
        raise TruncationBudgetError(f"Frostman grid needs {points} points, budget {config.KAUFMAN_MAX_WINDOW}")
    if samples_per_ball < 64:
        raise ValueError("need at least 64 samples per ball")
    started = time.time()
    _, nu_sets = prime_sets(params)
    grid_h = 1.0 / points
    x = -0.5 + (np.arange(points) + 0.5) * grid_h
    density = product_density(n, "nu", params, phi)(x)
    cumulative = np.concatenate(([0.0], np.cumsum(density) * grid_h))
    width = int(round(2.0 / (q_n * grid_h)))
    masses = cumulative[width:] - cumulative[:-width]
    sup_mass = float(masses.max())

    bound = q_n ** (-params.s) * math.log(q_n)
    for i in range(1, n):
        bound *= params.q[i - 1] ** (1.0 - params.s) * math.log(params.q[i - 1])
    for i in range(1, n + 1):
        bound *= params.h(i)

    sup_norms = []
    for i in range(1, n + 1):
        q, primes = params.q[i - 1], nu_sets[i - 1]
        p = int(primes.min())
        predicted = q / (p - 1.0) * phi.sup_norm / primes.size
        peaks = np.array([m / pp for pp in primes.tolist() for m in (1, -1)])
        measured = float(max(factor_density(peaks, q, primes, "nu", phi).max(),
                             factor_density(x, q, primes, "nu", phi).max()))
        sup_norms.append({"level": i, "measured": measured, "predicted": predicted,
                          "matches": abs(measured - predicted) <= 1e-9 * predicted})
    log_performance("kaufman_frostman", time.time() - started, construction="kaufman", level=n)
    return {"level": n, "sup_ball_mass": sup_mass, "bound_without_constant": bound,
            "fitted_constant": (sup_mass / bound) ** (1.0 / n), "sup_norms": sup_norms,
            "separation": [separation_check(params, i) for i in range(1, n + 1)]}


def pointwise_comparison(params: KaufmanParams, i: int, phi: Optional[AuxPhi] = None,
                         grid_points: int = 1 << 16) -> Dict:
    """F^ν_i ≤ factor·F^μ_i on a grid and at every ν bump centre."""
    phi = phi or build_phi()
    mu_sets, nu_sets = prime_sets(params)
    mu, nu = mu_sets[i - 1], nu_sets[i - 1]
    factor = comparison_factor(params, i, mu, nu)
    if not math.isfinite(factor):
        return {"level": i, "applicable": False, "factor": factor}
    q = params.q[i - 1]
    x = np.linspace(-0.5, 0.5, grid_points + 1)
    centres = np.array([m / p for p in nu.tolist() for m in range(-(p // 2), p // 2 + 1) if m % p])
    x = np.concatenate((x, centres))
    f_nu = factor_density(x, q, nu, "nu", phi)
    f_mu = factor_density(x, q, mu, "mu", phi)
    excess = f_nu - factor * f_mu
    worst = int(np.argmax(excess))
    if excess[worst] > 1e-9 * max(1.0, f_nu[worst]):
        raise ComparisonViolation(f"F^nu exceeds factor·F^mu at x={x[worst]:.8f}", witness=float(x[worst]))
    positive = f_nu > 0
    slack = float(np.min(factor * f_mu[positive] / f_nu[positive])) if positive.any() else math.inf
    return {"level": i, "applicable": True, "factor": factor, "min_slack": slack}


def averaging_check(n: int, params: KaufmanParams, phi: Optional[AuxPhi] = None, samples: int = 500,
                    seed: int = 0, K_out: Optional[int] = None) -> Dict:
    """|ν̂(k+l)| against C·μ̂(k) + C_ε(1+|k|)^{−0.9} for |k| > 2q_n, |l| < q_n/2."""
    phi = phi or build_phi()
    q_n = params.q[n - 1]
    K_out = K_out or int(8 * q_n)
    mu = product_coeffs(n, "mu", params, phi, K_out=K_out)
    nu = product_coeffs(n, "nu", params, phi, K_out=K_out)
    rng = make_rng(seed, "kaufman_averaging", n)
    k_lo = int(2 * q_n) + 1
    k_hi = K_out - int(q_n / 2) - 1
    ks = rng.integers(k_lo, k_hi, size=samples) * rng.choice((-1, 1), size=samples)
    ls = rng.integers(-int(q_n / 2) + 1, int(q_n / 2), size=samples)
    mu_hat = mu.transform(ks.astype(float))
    nu_hat = np.abs(nu.transform((ks + ls).astype(float)))

    mu_sets, nu_sets = prime_sets(params)
    C = math.prod(comparison_factor(params, i, mu_sets[i - 1], nu_sets[i - 1]) for i in range(1, n + 1))
    excess = np.maximum(nu_hat - C * mu_hat, 0.0)
    C_eps = float(np.max(excess * (1.0 + np.abs(ks)) ** AVERAGING_EXPONENT))
    return {"level": n, "samples": samples, "C": C, "C_eps": C_eps, "exponent": AVERAGING_EXPONENT,
            "fraction_without_eps": float(np.mean(excess == 0.0)),
            "mu_positive": bool(np.all(mu_hat > 0))}


def comparison_checks(n: int, params: KaufmanParams, phi: Optional[AuxPhi] = None, seed: int = 0) -> Dict:
    """Pointwise factor comparison at every level plus the sampled frequency-averaging check."""
    phi = phi or build_phi()
    return {
        "pointwise": [pointwise_comparison(params, i, phi) for i in range(1, n + 1)],
        "averaging": averaging_check(n, params, phi, seed=seed),
    }


def divisor_bound_check(params: KaufmanParams, i: int, ks: Sequence[int]) -> Dict:
    """|#{p | k} − Σ_{p∤k} 1/(p−1)| against log|k|/log x + #P^ν/x, x = q^{s/2}/h."""
    nu = prime_sets(params)[1][i - 1]
    ks = np.asarray(ks, dtype=np.int64)
    counts, recip = _divisor_stats(ks, nu)
    total = float(np.sum(1.0 / (nu - 1.0)))
    lhs = np.abs(counts - (total - recip))
    x = params.threshold(i)
    if x <= 1.0:
        return {"level": i, "applicable": False}
    rhs = np.log(np.maximum(np.abs(ks), 2)) / math.log(x) + nu.size / x
    return {"level": i, "applicable": True, "constant": float(np.max(lhs / rhs))}
