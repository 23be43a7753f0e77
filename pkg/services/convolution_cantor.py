"""Modified Salem infinite-convolution Cantor measure.

Level k has d_k = k + 1 atoms x^k_j in (0, 1), separated by more than L_k = d_k^{−1/s},
with weights that are uniform except for one lowered and one raised entry. The measure is
the convolution of ν_k = Σ_j p^k_j δ_{(Π_{n<k} l_n)·x^k_j}. Because the weights are unequal,
the max/min ratio of weight products diverges, while the point sets keep the arithmetic
independence (large a_r_min) that drives Fourier decay.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tenacity import Retrying, RetryError, stop_after_attempt, retry_if_exception_type

from config import config
from services.core_measure import AtomicMeasure, ProductMeasure, MeasureError
from utils.logging_config import log_performance
from utils.rng import make_rng

logger = logging.getLogger(__name__)


class SamplingError(Exception):
    """Point sampling exhausted its retry cap"""

    def __init__(self, message: str, best_a_r_min: float = 0.0, best_points: Optional[np.ndarray] = None):
        super().__init__(message)
        self.best_a_r_min = best_a_r_min
        self.best_points = best_points


class EnumerationBudgetError(Exception):
    """Integer-vector enumeration would exceed the configured budget"""
    pass


class _BelowThreshold(Exception):
    """Candidate points rejected (internal retry signal)"""
    pass


@dataclass(frozen=True)
class SalemLevelParams:
    """Parameters of one convolution level."""
    k: int
    d: int
    r: float
    L: float
    t: float
    l: float
    points: Tuple[float, ...]
    weights: Tuple[float, ...]
    a_r_min: float
    attempts: int = 1

    def to_dict(self) -> Dict:
        return {
            "k": self.k, "d_k": self.d, "r_k": self.r, "L_k": self.L, "t_k": self.t, "l_k": self.l,
            "points": list(self.points), "weights": list(self.weights),
            "a_r_min": self.a_r_min, "attempts": self.attempts,
        }


@dataclass
class ConvolutionBuild:
    """Built instance: product measure plus per-level parameters."""
    measure: ProductMeasure
    levels: List[SalemLevelParams]
    s: float
    seed: Optional[int]

    @property
    def scales(self) -> List[float]:
        """Π_{n<k} l_n for k = 1..K."""
        out, acc = [], 1.0
        for level in self.levels:
            out.append(acc)
            acc *= level.l
        return out


@dataclass
class AhlforsReport:
    passed: bool
    worst_ratio: float
    worst_level: int
    witness: Optional[Dict] = None
    per_level: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "worst_ratio": self.worst_ratio,
            "worst_level": self.worst_level,
            "witness": self.witness,
            "per_level": self.per_level,
        }


# ─────────────────────────────
# Level constants
# ─────────────────────────────
def level_constants(k: int, s: float) -> Tuple[int, float, float]:
    """(d_k, L_k, r_k) with log d_k / log(1/L_k) = s and r_k = max(1, √ln k)."""
    if k < 1:
        raise ValueError("level index starts at 1")
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    d = k + 1
    L = d ** (-1.0 / s)
    r = max(1.0, math.sqrt(math.log(k))) if k > 1 else 1.0
    return d, L, r


def shrink_factor(k: int, L: float, t: float) -> float:
    """l_k = (1 − (k+1)^{−2})L_k + t_k L_k (k+1)^{−2}."""
    c = (k + 1) ** -2
    return (1.0 - c) * L + t * L * c


# ─────────────────────────────
# a_r_min
# ─────────────────────────────
def _half_vectors(points: np.ndarray, R: int):
    """All m ∈ [−R, R]^n with their Σm and Σm·x, for one half of the coordinates."""
    n = points.size
    if n == 0:
        return np.zeros(1, dtype=np.int64), np.zeros(1), np.zeros((1, 0), dtype=np.int64)
    axis = np.arange(-R, R + 1, dtype=np.int64)
    grids = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return grids.sum(axis=1), grids @ points, grids


def a_r_min(points: Sequence[float], r: float) -> float:
    """min |Σ m_j x_j| over nonzero integer m with |m_j| ≤ 2r and Σ m_j = 0.

    Exact meet-in-the-middle search: split the coordinates, group half-vectors by Σm,
    and for each left half find the closest right-half value to −u by binary search.
    """
    x = np.asarray(points, dtype=float)
    d = x.size
    if d < 2:
        raise ValueError("need at least two points")
    R = int(math.floor(2 * r))
    if (2 * R + 1) ** d > config.ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"(2·{R}+1)^{d} exceeds budget {config.ENUMERATION_BUDGET}")
    if R == 0:
        return math.inf

    half = d // 2
    sum_a, val_a, vec_a = _half_vectors(x[:half], R)
    sum_b, val_b, vec_b = _half_vectors(x[half:], R)

    best = math.inf
    for total in np.unique(sum_a):
        left = sum_a == total
        right = sum_b == -total
        if not right.any():
            continue
        u = val_a[left]
        v = val_b[right]
        zero_a = ~vec_a[left].any(axis=1)
        zero_b = ~vec_b[right].any(axis=1)
        order = np.argsort(v, kind="stable")
        v_sorted = v[order]
        zero_sorted = zero_b[order]
        pos = np.searchsorted(v_sorted, -u)
        for shift in (-1, 0, 1):
            idx = np.clip(pos + shift, 0, v_sorted.size - 1)
            gap = np.abs(u + v_sorted[idx])
            # the all-zero vector is excluded
            gap = np.where(zero_a & zero_sorted[idx], math.inf, gap)
            best = min(best, float(gap.min()))
        if best > 0 and (zero_a.any() or zero_b.any()):
            # exact zero of one side paired with a nonzero other side that is not adjacent in sort order
            nonzero_v = v[~zero_b]
            if zero_a.any() and nonzero_v.size:
                best = min(best, float(np.abs(nonzero_v).min()))
            nonzero_u = u[~zero_a]
            if zero_b.any() and nonzero_u.size:
                best = min(best, float(np.abs(nonzero_u).min()))
    return best


def a_r_min_exhaustive(points: Sequence[float], r: float) -> float:
    """Direct enumeration in reversed coordinate order (oracle for a_r_min)."""
    x = [float(v) for v in points]
    d = len(x)
    R = int(math.floor(2 * r))
    if (2 * R + 1) ** d > config.ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"(2·{R}+1)^{d} exceeds budget {config.ENUMERATION_BUDGET}")
    best = math.inf
    for m in itertools.product(range(R, -R - 1, -1), repeat=d):
        if sum(m) != 0 or not any(m):
            continue
        value = abs(math.fsum(mj * xj for mj, xj in zip(reversed(m), reversed(x))))
        best = min(best, value)
    return best


# ─────────────────────────────
# Sampling and weights
# ─────────────────────────────
def point_invariants_hold(points: Sequence[float], L: float) -> bool:
    x = np.asarray(points, dtype=float)
    d = x.size
    gaps = np.diff(x)
    return bool(
        0 < x[0] < 1.0 / d - L
        and np.all(gaps > L) and np.all(gaps < 1.0 / d)
        and x[-1] < 1.0 - L
    )


def _draw_points(d: int, L: float, rng: np.random.Generator) -> np.ndarray:
    x1 = rng.uniform(0.0, 1.0 / d - L)
    gaps = rng.uniform(L, 1.0 / d, size=d - 1)
    return np.concatenate(([x1], x1 + np.cumsum(gaps)))


def sample_points(k: int, s: float, rng: np.random.Generator, retry_cap: Optional[int] = None,
                  C: Optional[float] = None) -> Tuple[np.ndarray, float, int]:
    """Draw level-k points meeting the separation and a_r_min ≥ (C r_k)^{−2d_k} constraints.

    Returns (points, a_r_min, attempts).
    """
    d, L, r = level_constants(k, s)
    if not L < 1.0 / d:
        raise ValueError(f"L_k={L} must be below 1/d_k")
    C = config.CONVOLUTION_C if C is None else C
    cap = config.CONVOLUTION_RETRY_CAP if retry_cap is None else retry_cap
    threshold = (C * r) ** (-2 * d)
    best = {"value": -1.0, "points": None}

    def attempt() -> Tuple[np.ndarray, float]:
        # gaps in (L, 1/d) and x1 < 1/d − L give x_d < 1 − L automatically
        x = _draw_points(d, L, rng)
        value = a_r_min(x, r)
        if value > best["value"]:
            best["value"], best["points"] = value, x
        if value < threshold:
            raise _BelowThreshold()
        return x, value

    retrying = Retrying(stop=stop_after_attempt(cap), retry=retry_if_exception_type(_BelowThreshold),
                        reraise=False)
    try:
        x, value = retrying(attempt)
    except RetryError as e:
        raise SamplingError(
            f"level {k}: no admissible points in {cap} attempts (best a_r_min {best['value']:.3e}, "
            f"threshold {threshold:.3e})",
            best_a_r_min=best["value"], best_points=best["points"],
        ) from e
    attempts = retrying.statistics.get("attempt_number", 1)
    return x, value, attempts


def weights_exact(k: int) -> List[Fraction]:
    """p_1 = (1 − 1/(k+1))/d, p_2 = (1 + 1/(k+1))/d, p_j = 1/d for j ≥ 3."""
    if k < 1:
        raise ValueError("level index starts at 1")
    d = k + 1
    bump = Fraction(1, k + 1)
    out = [(1 - bump) / d, (1 + bump) / d]
    out.extend(Fraction(1, d) for _ in range(d - 2))
    return out


def weights(k: int) -> np.ndarray:
    return np.array([float(p) for p in weights_exact(k)])


def ratio_sequence_exact(K: int) -> List[Fraction]:
    """max/min weight-product ratio over levels 1..N, for N = 1..K."""
    if K < 1:
        raise ValueError("K must be at least 1")
    out, acc = [], Fraction(1)
    for k in range(1, K + 1):
        w = weights_exact(k)
        acc *= max(w) / min(w)
        out.append(acc)
    return out


def ratio_sequence(K: int) -> List[float]:
    return [float(v) for v in ratio_sequence_exact(K)]


# ─────────────────────────────
# Build
# ─────────────────────────────
def build(s: float, K: int, t: Optional[Sequence[float]] = None, seed: Optional[int] = None,
          rng: Optional[np.random.Generator] = None) -> ConvolutionBuild:
    """Construct ν_1 * … * ν_K.

    Level k draws its points and t_k from the stream labelled ("convolution", k), unless an
    explicit generator is passed; t overrides the random t_k.
    """
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    if not 1 <= K <= config.CONVOLUTION_MAX_LEVELS:
        raise ValueError(f"K must lie in [1, {config.CONVOLUTION_MAX_LEVELS}]")
    if t is not None and len(t) < K:
        raise ValueError("t vector shorter than K")
    if rng is None and seed is None:
        raise ValueError("seed is mandatory for randomized constructions")

    started = time.time()
    levels: List[SalemLevelParams] = []
    factors: List[AtomicMeasure] = []
    scale = 1.0
    for k in range(1, K + 1):
        level_rng = rng if rng is not None else make_rng(seed, "convolution", k)
        d, L, r = level_constants(k, s)
        points, value, attempts = sample_points(k, s, level_rng)
        t_k = float(t[k - 1]) if t is not None else float(level_rng.uniform(0.0, 1.0))
        if not 0.0 <= t_k <= 1.0:
            raise ValueError(f"t_{k}={t_k} outside [0, 1]")
        l_k = shrink_factor(k, L, t_k)
        w = weights(k)
        levels.append(SalemLevelParams(k, d, r, L, t_k, l_k, tuple(points.tolist()),
                                       tuple(w.tolist()), value, attempts))
        factors.append(AtomicMeasure.from_atoms(scale * points, w, (0.0, scale), tag=f"nu_{k}"))
        logger.debug(f"Level {k}: d={d}, a_r_min={value:.3e} after {attempts} attempt(s)")
        scale *= l_k

    measure = ProductMeasure(tuple(factors), (0.0, 1.0), tag=f"convolution(s={s},K={K})")
    for level in levels:
        if not point_invariants_hold(level.points, level.L):
            raise MeasureError(f"level {level.k} points violate separation")
    log_performance("convolution_build", time.time() - started, construction="convolution", level=K)
    return ConvolutionBuild(measure, levels, s, seed)


# ─────────────────────────────
# Ahlfors regularity
# ─────────────────────────────
def ahlfors_check(b: ConvolutionBuild, eps: float = 1e-12,
                  weight_override: Optional[Dict[Tuple[int, int], float]] = None) -> AhlforsReport:
    """(n+1)^{−1} r^s ≤ μ(I) ≤ (n+1) r^s for every n-interval I, r = Π_{k≤n} l_k.

    ``weight_override`` maps (level, index) to a replacement weight; used for fault injection.
    """
    s = b.s
    report = AhlforsReport(passed=True, worst_ratio=1.0, worst_level=0,
                           per_level=[{"n": 0, "min_ratio": 1.0, "max_ratio": 1.0}])
    masses = np.ones(1)
    lefts = np.zeros(1)
    scale = 1.0
    for level in b.levels:
        n = level.k
        w = np.array(level.weights)
        if weight_override:
            for (lk, j), value in weight_override.items():
                if lk == n:
                    w[j] = value
        masses = np.multiply.outer(masses, w).ravel()
        lefts = np.add.outer(lefts, scale * np.array(level.points)).ravel()
        scale *= level.l
        r = scale
        target = r ** s
        ratios = masses / target
        lo_bound, hi_bound = 1.0 / (n + 1), float(n + 1)
        lo_idx, hi_idx = int(np.argmin(ratios)), int(np.argmax(ratios))
        report.per_level.append({"n": n, "r": r, "min_ratio": float(ratios[lo_idx]),
                                 "max_ratio": float(ratios[hi_idx])})

        worst_here = max(float(ratios[hi_idx]) / hi_bound, lo_bound / float(ratios[lo_idx]))
        if worst_here > report.worst_ratio:
            report.worst_ratio, report.worst_level = worst_here, n

        for idx, bad in ((lo_idx, ratios[lo_idx] < lo_bound * (1 - eps)),
                         (hi_idx, ratios[hi_idx] > hi_bound * (1 + eps))):
            if bad and report.passed:
                report.passed = False
                report.witness = {"n": n, "interval": [float(lefts[idx]), float(lefts[idx] + r)],
                                  "mass": float(masses[idx]), "r_pow_s": target,
                                  "bounds": [lo_bound * target, hi_bound * target]}
                logger.warning(f"Ahlfors bound violated at level {n}: {report.witness}")
    return report


def acceptance_rate(k: int, s: float, trials: int, seed: int, C: Optional[float] = None) -> float:
    """Fraction of single draws at level k that meet the a_r_min threshold."""
    d, L, r = level_constants(k, s)
    C = config.CONVOLUTION_C if C is None else C
    threshold = (C * r) ** (-2 * d)
    rng = make_rng(seed, "convolution_acceptance", k)
    accepted = sum(a_r_min(_draw_points(d, L, rng), r) >= threshold for _ in range(trials))
    return accepted / trials
