"""Brownian images of the explicit heavy-at-zero dyadic measure.

The base measure follows the dyadic Cantor scheme without randomness: a thinning step keeps
the left child of every node, and a doubling step gives node 0 a 1/√2 share on itself.
Hence μ([0, 2^{−j}]) = (t_1⋯t_j)^{−1/2} while intervals away from the origin stay small.
Images ω_*μ under simulated Brownian paths are discretized as one atom per level-J cell.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from config import config
from services.core_measure import (
    AtomicMeasure, BallProfile, StepDensity, fit_ball_exponents, fourier_atomic_many,
)
from services.nonconvolution_cantor import INV_SQRT2, t_sequence
from utils.logging_config import log_performance
from utils.rng import make_rng

logger = logging.getLogger(__name__)

HOLDER_ALPHA = 0.4


class ResolutionMismatch(Exception):
    """Path grid too coarse for the base measure"""
    pass


class BallConditionViolation(Exception):
    """Base measure broke a ball condition it satisfies by construction"""

    def __init__(self, message: str, witness: Optional[Dict] = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """W sampled at grid indices (times index/n_grid)."""
    n_grid: int
    indices: np.ndarray
    values: np.ndarray
    seed: Optional[int] = None

    @property
    def times(self) -> np.ndarray:
        return self.indices / self.n_grid

    @property
    def is_full(self) -> bool:
        return self.indices.size == self.n_grid + 1

    def value_at(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        pos = np.searchsorted(self.indices, indices)
        pos = np.minimum(pos, self.indices.size - 1)
        if np.any(self.indices[pos] != indices):
            raise ResolutionMismatch("path was not sampled at every requested index")
        return self.values[pos]


@dataclass(frozen=True, eq=False)
class BaseMeasure:
    density: StepDensity
    t: Tuple[int, ...]
    s: float

    @property
    def J(self) -> int:
        return self.density.level

    def heavy_ladder(self) -> List[float]:
        """(t_1⋯t_j)^{−1/2} for j = 0..J."""
        out, doublings = [1.0], 0
        for tj in self.t:
            doublings += tj == 2
            out.append(2.0 ** (-doublings / 2.0))
        return out

    def to_dict(self) -> Dict:
        return {"s": self.s, "J": self.J, "t": list(self.t), "node_count": int(self.density.nodes.size)}


@dataclass
class DecayReport:
    s: float
    J: int
    n_paths: int
    seed: int
    xi: List[float]
    mean: List[float]
    stderr: List[float]
    expected: List[float]
    fitted_constant: float
    slope: float
    slope_stderr: float
    within_tolerance: List[bool] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "s": self.s, "J": self.J, "n_paths": self.n_paths, "seed": self.seed,
            "xi": self.xi, "mean": self.mean, "stderr": self.stderr, "expected": self.expected,
            "fitted_constant": self.fitted_constant, "slope": self.slope,
            "slope_stderr": self.slope_stderr, "within_tolerance": self.within_tolerance,
        }


# ─────────────────────────────
# Paths
# ─────────────────────────────
def _check_grid(n_grid: int):
    if n_grid < 1 << 10 or n_grid & (n_grid - 1):
        raise ValueError("n_grid must be a power of two ≥ 2^10")


def simulate_path(n_grid: int, seed: int, at: Optional[Sequence[int]] = None,
                  replica: int = 0) -> BrownianPath:
    """Standard Brownian motion on [0, 1] at grid times i/n_grid.

    With `at`, only those indices (plus 0) are drawn, using exact Gaussian increments
    between consecutive requested times. Same seed and replica give the same path.
    """
    _check_grid(n_grid)
    rng = make_rng(seed, "brownian", replica)
    if at is None:
        steps = rng.normal(0.0, math.sqrt(1.0 / n_grid), size=n_grid)
        values = np.concatenate(([0.0], np.cumsum(steps)))
        return BrownianPath(n_grid, np.arange(n_grid + 1, dtype=np.int64), values, seed)

    indices = np.unique(np.concatenate(([0], np.asarray(at, dtype=np.int64))))
    if indices[0] < 0 or indices[-1] > n_grid:
        raise ValueError("requested index outside the grid")
    gaps = np.diff(indices) / n_grid
    steps = rng.normal(0.0, 1.0, size=gaps.size) * np.sqrt(gaps)
    values = np.concatenate(([0.0], np.cumsum(steps)))
    return BrownianPath(n_grid, indices, values, seed)


def holder_quotient(path: BrownianPath, alpha: float = HOLDER_ALPHA) -> float:
    """sup |W(t) − W(u)| / |t − u|^alpha over dyadic lags of a full path."""
    if not path.is_full:
        raise ResolutionMismatch("Hölder quotient needs a fully sampled path")
    best = 0.0
    lag = 1
    while lag <= path.n_grid // 2:
        increments = np.abs(path.values[lag:] - path.values[:-lag])
        best = max(best, float(increments.max()) / (lag / path.n_grid) ** alpha)
        lag *= 2
    return best


# ─────────────────────────────
# Base measure
# ─────────────────────────────
def base_measure(s: float, J: int) -> BaseMeasure:
    """Deterministic level-J step density with node 0 as the heavy chain."""
    if not 0 < s <= 0.5:
        raise ValueError("s must lie in (0, 1/2]")
    t = t_sequence(s, J)
    nodes = np.zeros(1, dtype=np.int64)
    weights = np.ones(1)
    for tj in t:
        if tj == 1:
            nodes = 2 * nodes
            continue
        left = weights / 2.0
        right = weights / 2.0
        left[0], right[0] = weights[0] * INV_SQRT2, weights[0] * (1.0 - INV_SQRT2)
        nodes = np.stack((2 * nodes, 2 * nodes + 1), axis=1).ravel()
        weights = np.stack((left, right), axis=1).ravel()
    density = StepDensity.from_cells(J, nodes, weights, 1.0, tag=f"brownian_base(s={s},J={J})")
    return BaseMeasure(density, t, s)


def ball_identity_check(base: BaseMeasure, tol: float = 1e-12) -> Dict:
    """μ([0, 2^{−j}]) against (t_1⋯t_j)^{−1/2} for every j ≤ J."""
    ladder = np.asarray(base.heavy_ladder())
    radii = 2.0 ** -np.arange(base.J + 1)
    masses = base.density.cdf(radii)
    errors = np.abs(masses - ladder)
    worst = int(np.argmax(errors))
    return {"passed": bool(errors[worst] <= tol), "max_error": float(errors[worst]),
            "witness_level": worst, "masses": masses.tolist()}


def scan_check(base: BaseMeasure, C: Optional[float] = None) -> Dict:
    """max over support nodes x > 0 and j ≤ J of μ([x, x+2^{−j}]) / min(1, x^{−s/2}·2^{−sj}).

    Interval masses come from the exact CDF of the step density.
    """
    x = base.density.positions[base.density.positions > 0]
    worst = {"constant": 0.0, "x": None, "j": None}
    for j in range(1, base.J + 1):
        r = 2.0 ** -j
        masses = base.density.cdf(x + r) - base.density.cdf(x)
        bound = np.minimum(1.0, x ** (-base.s / 2.0) * r ** base.s)
        ratios = masses / bound
        i = int(np.argmax(ratios))
        if ratios[i] > worst["constant"]:
            worst = {"constant": float(ratios[i]), "x": float(x[i]), "j": j}
    report = {"passed": True, **worst}
    if C is not None and worst["constant"] > C:
        report["passed"] = False
        raise BallConditionViolation(
            f"interval [{worst['x']}, {worst['x']}+2^-{worst['j']}] exceeds constant {C}: {worst['constant']:.4f}",
            witness=report,
        )
    return report


# ─────────────────────────────
# Images
# ─────────────────────────────
def required_indices(base: BaseMeasure, n_grid: int) -> np.ndarray:
    """Grid indices of the level-J cell centres."""
    J = base.J
    if n_grid < 1 << (J + 1):
        raise ResolutionMismatch(f"path grid 2^{int(math.log2(n_grid))} below cell-centre grid 2^{J + 1}")
    return (2 * base.density.nodes + 1) * (n_grid >> (J + 1))


def pushforward(base: BaseMeasure, path: BrownianPath) -> AtomicMeasure:
    """One atom at W(cell centre) per level-J cell, carrying the cell mass."""
    values = path.value_at(required_indices(base, path.n_grid))
    return AtomicMeasure.from_atoms(values, base.density.weights, tag="brownian_image")


def expected_energy(base: BaseMeasure, xi) -> np.ndarray:
    """E|μ̂_ω(ξ)|² = ΣΣ w_a w_b exp(−2π²ξ²|c_a − c_b|) for the cell-centre discretization."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rate = 2.0 * np.pi ** 2 * xi * xi
    centres = base.density.positions + 0.5 * base.density.cell_width
    w = base.density.weights
    # running sum S_a = Σ_{b<a} w_b exp(−rate(c_a − c_b))
    running = np.zeros_like(xi)
    cross = np.zeros_like(xi)
    for a in range(1, centres.size):
        running = np.exp(-rate * (centres[a] - centres[a - 1])) * (running + w[a - 1])
        cross += w[a] * running
    return math.fsum(w * w) + 2.0 * cross


def decay_mc(s: float, seed: int, J: Optional[int] = None, xi_set: Optional[Sequence[float]] = None,
             n_paths: Optional[int] = None) -> DecayReport:
    """Monte Carlo mean of |μ̂_ω(ξ)|² over independent paths, with the exact expectation."""
    J = config.BROWNIAN_LEVELS if J is None else J
    n_paths = config.BROWNIAN_PATHS if n_paths is None else n_paths
    if n_paths < 100:
        raise ValueError("n_paths must be at least 100")
    xi = np.asarray(xi_set if xi_set is not None else 2.0 ** np.arange(2, 9), dtype=float)
    started = time.time()

    base = base_measure(s, J)
    n_grid = 1 << (J + 1)
    indices = required_indices(base, n_grid)
    samples = np.empty((n_paths, xi.size))
    for replica in range(n_paths):
        path = simulate_path(n_grid, seed, at=indices, replica=replica)
        samples[replica] = np.abs(fourier_atomic_many(pushforward(base, path), xi)) ** 2

    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(n_paths)
    expected = expected_energy(base, xi)
    scale = np.abs(xi) ** (-2.0 * s) * np.maximum(np.log(np.abs(xi)), 1.0)
    fit = linregress(np.log(xi), np.log(mean)) if xi.size >= 3 else None
    log_performance("brownian_decay_mc", time.time() - started, construction="brownian", seed=seed)
    return DecayReport(
        s=s, J=J, n_paths=n_paths, seed=seed,
        xi=xi.tolist(), mean=mean.tolist(), stderr=stderr.tolist(), expected=expected.tolist(),
        fitted_constant=float(np.max(mean / scale)),
        slope=float(fit.slope) if fit else math.nan,
        slope_stderr=float(fit.stderr) if fit else math.nan,
        within_tolerance=(np.abs(mean - expected) <= 4.0 * stderr + 1e-12).tolist(),
    )


def heavy_ball_profile(base: BaseMeasure, path: BrownianPath, radii: Optional[Sequence[float]] = None) -> BallProfile:
    """Lower-side ball exponent of ω_*μ at W(0) = 0."""
    radii = 2.0 ** -np.arange(1, 9) if radii is None else np.asarray(radii, dtype=float)
    image = pushforward(base, path)
    return fit_ball_exponents(image, [0.0], radii, side="lower", tag="brownian_heavy_ball")
