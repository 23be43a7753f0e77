"""Random dyadic Cantor measure built by Bernstein-threshold rejection sampling.

At level j the support is a set A_j of dyadic nodes, #A_j = t_1⋯t_j with t_j ∈ {1, 2}.
A doubling step (t = 2) splits every node evenly except the heavy node a_j, which keeps a
1/√2 share on one child; a thinning step (t = 1) keeps one random child per node and is
resampled until the coefficient increment is uniformly below the Bernstein threshold.
The heavy chain carries mass (t_1⋯t_j)^{−1/2}, far above the typical (t_1⋯t_j)^{−1}.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from tenacity import Retrying, RetryError, stop_after_attempt, retry_if_exception_type

from config import config
from services.bump_function import smooth_step
from services.core_measure import StepDensity, fourier_step_many, _cell_prefactor, ball_mass
from utils.logging_config import log_performance
from utils.rng import make_rng

logger = logging.getLogger(__name__)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
# σ² gain of a doubling step relative to the heavy weight: σ²_{j+1} = σ²_j/2 + SPLIT_GAIN·p²
SPLIT_GAIN = 1.5 - math.sqrt(2.0)


class RetryCapExceeded(Exception):
    """Rejection sampling hit its retry cap"""

    def __init__(self, message: str, best_max: float = math.inf):
        super().__init__(message)
        self.best_max = best_max


class _AboveThreshold(Exception):
    """Candidate rejected (internal retry signal)"""
    pass


@dataclass(frozen=True, eq=False)
class DyadicState:
    """Level-j support, weights and heavy node."""
    j: int
    nodes: np.ndarray
    weights: np.ndarray
    t: Tuple[int, ...]
    sigma_sq: float
    heavy_node: int
    s: float
    doublings: int = 0
    attempts: int = 0
    flags: Tuple[str, ...] = ()

    @property
    def heavy_position(self) -> float:
        return self.heavy_node / 2.0 ** self.j

    @property
    def heavy_index(self) -> int:
        return int(np.searchsorted(self.nodes, self.heavy_node))

    def density(self) -> StepDensity:
        return StepDensity.from_cells(self.j, self.nodes, self.weights, 1.0, tag=f"cantor_j{self.j}")

    def to_dict(self) -> Dict:
        return {
            "j": self.j, "node_count": int(self.nodes.size), "t": list(self.t),
            "sigma_sq": self.sigma_sq, "heavy_node": self.heavy_position,
            "heavy_mass": float(self.weights[self.heavy_index]),
            "attempts": self.attempts, "flags": list(self.flags),
        }


@dataclass
class CantorBuild:
    states: List[DyadicState]
    s: float
    seed: Optional[int]
    flags: List[str] = field(default_factory=list)

    @property
    def final(self) -> DyadicState:
        return self.states[-1]


# ─────────────────────────────
# Sequence and threshold
# ─────────────────────────────
def t_sequence(s: float, J: int) -> Tuple[int, ...]:
    """t_1 = 2; t_j = 1 iff t_1⋯t_{j−1} ≥ 2^{sj}."""
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    if J < 1:
        raise ValueError("J must be at least 1")
    s_exact = Fraction(s)
    out = [2]
    doublings = 1
    for j in range(2, J + 1):
        # Π t ≥ 2^{sj} ⟺ doublings ≥ s·j
        if doublings >= s_exact * j:
            out.append(1)
        else:
            out.append(2)
            doublings += 1
    return tuple(out)


def bernstein_threshold(sigma_sq: float, j: int) -> float:
    """λ = 2√2·σ·√((j+4)·ln 2)."""
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be positive")
    return 2.0 * math.sqrt(2.0) * math.sqrt(sigma_sq) * math.sqrt((j + 4) * math.log(2.0))


def initial_state(s: float) -> DyadicState:
    return DyadicState(0, np.zeros(1, dtype=np.int64), np.ones(1), (), 1.0, 0, s)


def _sigma_sq(weights: np.ndarray) -> float:
    return math.fsum(weights * weights)


# ─────────────────────────────
# Level growth
# ─────────────────────────────
def _double(state: DyadicState) -> DyadicState:
    n = state.nodes
    p = state.weights
    left = p / 2.0
    right = left.copy()
    h = state.heavy_index
    if state.j == 0:
        # base case: the heavy share goes to the child 1/2, which becomes a_1
        left[h], right[h] = p[h] * (1.0 - INV_SQRT2), p[h] * INV_SQRT2
        heavy = 2 * state.heavy_node + 1
    else:
        left[h], right[h] = p[h] * INV_SQRT2, p[h] * (1.0 - INV_SQRT2)
        heavy = 2 * state.heavy_node
    nodes = np.stack((2 * n, 2 * n + 1), axis=1).ravel()
    weights = np.stack((left, right), axis=1).ravel()
    return DyadicState(state.j + 1, nodes, weights, state.t + (2,), _sigma_sq(weights), heavy,
                       state.s, state.doublings + 1, 0, state.flags)


def increment_sums(state: DyadicState, offsets: np.ndarray) -> np.ndarray:
    """Σ_a χ_a(k) for k = 0..2^{j+1}−1 given the kept child offset of each node."""
    size = 1 << (state.j + 1)
    v = np.zeros(size)
    np.add.at(v, 2 * state.nodes + offsets, state.weights)
    np.add.at(v, 2 * state.nodes, -0.5 * state.weights)
    np.add.at(v, 2 * state.nodes + 1, -0.5 * state.weights)
    return np.fft.fft(v)


def _thin(state: DyadicState, offsets: np.ndarray, attempts: int, flags: Tuple[str, ...]) -> DyadicState:
    nodes = 2 * state.nodes + offsets
    heavy = int(nodes[state.heavy_index])
    # offsets preserve order, so nodes stay sorted
    return DyadicState(state.j + 1, nodes, state.weights.copy(), state.t + (1,), state.sigma_sq, heavy,
                       state.s, state.doublings, attempts, flags)


def grow_level(state: DyadicState, t_next: int, rng: np.random.Generator,
               retry_cap: Optional[int] = None, on_cap: Optional[str] = None) -> DyadicState:
    """One construction step; t_next = 1 steps are resampled until the threshold holds."""
    if t_next == 2:
        return _double(state)
    if t_next != 1:
        raise ValueError("t_next must be 1 or 2")

    cap = config.CANTOR_RETRY_CAP if retry_cap is None else retry_cap
    on_cap = (on_cap or config.CANTOR_ON_CAP).lower()
    threshold = bernstein_threshold(state.sigma_sq, state.j)
    best = {"max": math.inf, "offsets": None}

    def attempt() -> np.ndarray:
        offsets = rng.integers(0, 2, size=state.nodes.size)
        peak = float(np.abs(increment_sums(state, offsets)).max())
        if peak < best["max"]:
            best["max"], best["offsets"] = peak, offsets
        if peak > threshold:
            raise _AboveThreshold()
        return offsets

    retrying = Retrying(stop=stop_after_attempt(cap), retry=retry_if_exception_type(_AboveThreshold))
    try:
        offsets = retrying(attempt)
    except RetryError:
        message = (f"level {state.j + 1}: no sample under λ={threshold:.4f} in {cap} attempts "
                   f"(best {best['max']:.4f})")
        if on_cap == "raise":
            raise RetryCapExceeded(message, best["max"])
        logger.warning(f"{message}; keeping best candidate", extra={"construction": "cantor",
                                                                   "level": state.j + 1})
        return _thin(state, best["offsets"], cap, state.flags + (f"retry_cap_level_{state.j + 1}",))
    return _thin(state, offsets, retrying.statistics.get("attempt_number", 1), state.flags)


def acceptance_probability(state: DyadicState, trials: int, rng: np.random.Generator) -> float:
    """Fraction of single t = 1 draws accepted at the state's threshold."""
    threshold = bernstein_threshold(state.sigma_sq, state.j)
    accepted = 0
    for _ in range(trials):
        offsets = rng.integers(0, 2, size=state.nodes.size)
        accepted += float(np.abs(increment_sums(state, offsets)).max()) <= threshold
    return accepted / trials


def build(s: float, J: int, seed: int, retry_cap: Optional[int] = None,
          on_cap: Optional[str] = None) -> CantorBuild:
    """All states 0..J; level j draws from the stream labelled ("cantor", j)."""
    if seed is None:
        raise ValueError("seed is mandatory for randomized constructions")
    started = time.time()
    t = t_sequence(s, J)
    states = [initial_state(s)]
    for j, t_next in enumerate(t, start=1):
        states.append(grow_level(states[-1], t_next, make_rng(seed, "cantor", j), retry_cap, on_cap))
    flags = sorted({f for st in states for f in st.flags})
    log_performance("cantor_build", time.time() - started, construction="cantor", level=J)
    return CantorBuild(states, s, seed, flags)


# ─────────────────────────────
# Checks
# ─────────────────────────────
def heavy_mass(state: DyadicState) -> float:
    return float(state.weights[state.heavy_index])


def heavy_mass_exact(state: DyadicState) -> float:
    """(t_1⋯t_j)^{−1/2} from the doubling count."""
    return 2.0 ** (-state.doublings / 2.0)


def heavy_chain(b: CantorBuild) -> List[Tuple[int, float, float]]:
    """(j, a_j, p_{j,a_j}) for every built level."""
    return [(st.j, st.heavy_position, heavy_mass(st)) for st in b.states]


def heavy_ball_check(b: CantorBuild) -> Dict:
    """Closed ball of radius 2^{−j} at a_j carries at least the heavy mass."""
    density = b.final.density()
    worst = math.inf
    for j, position, mass in heavy_chain(b)[1:]:
        ratio = ball_mass(density, position, 2.0 ** -j) / mass
        worst = min(worst, ratio)
    return {"passed": worst >= 1.0 - 1e-12, "min_ratio": worst}


def increment_bound_check(prev: DyadicState, nxt: DyadicState, C: Optional[float] = None,
                          eps: Optional[float] = None) -> Dict:
    """max over |k| ≤ 2^{j+4} of |Δ(k)| / (min(1, 2^{j+1}/|k|)·2^{−(s−eps)j/2}), against C."""
    if nxt.j != prev.j + 1:
        raise ValueError("states must be consecutive")
    C = config.CANTOR_INCREMENT_C if C is None else C
    eps = config.CANTOR_INCREMENT_EPS if eps is None else eps
    j = prev.j
    K = 1 << (j + 4)
    ks = np.arange(-K, K + 1, dtype=np.int64)
    diff = np.abs(fourier_step_many(nxt.density(), ks) - fourier_step_many(prev.density(), ks))
    abs_k = np.maximum(np.abs(ks), 1)
    scale = np.minimum(1.0, 2.0 ** (j + 1) / abs_k) * 2.0 ** (-(prev.s - eps) * j / 2.0)
    ratios = diff / scale
    worst = int(np.argmax(ratios))
    report = {
        "j": j,
        "t_next": nxt.t[-1],
        "C": C,
        "eps": eps,
        "max_ratio": float(ratios[worst]),
        "witness_k": int(ks[worst]),
        "difference_at_zero": float(diff[K]),
        "passed": bool(ratios[worst] <= C),
    }
    if nxt.t[-1] == 2:
        # only the heavy cell changes: |Δ(k)| ≤ (√2 − 1)|P_{j+1}(k)|·p_{j,a_j}
        bound = (math.sqrt(2.0) - 1.0) * np.abs(_cell_prefactor(ks.astype(float), j + 1)) * heavy_mass(prev)
        report["doubling_bound_holds"] = bool(np.all(diff <= bound + 1e-12))
        report["passed"] = report["passed"] and report["doubling_bound_holds"]
    return report


def increment_trajectory_check(states: Sequence[DyadicState], C: Optional[float] = None,
                               eps: Optional[float] = None) -> Dict:
    """increment_bound_check over every consecutive pair of levels."""
    if len(states) < 2:
        raise ValueError("need at least two levels")
    C = config.CANTOR_INCREMENT_C if C is None else C
    eps = config.CANTOR_INCREMENT_EPS if eps is None else eps
    per_level = [increment_bound_check(prev, nxt, C, eps) for prev, nxt in zip(states, states[1:])]
    failed = [r["j"] for r in per_level if not r["passed"]]
    worst = max(per_level, key=lambda r: r["max_ratio"])
    witness = next(r for r in per_level if not r["passed"]) if failed else worst
    if failed:
        logger.warning(f"Increment bound C={C} fails at levels {failed}", extra={"construction": "cantor"})
    return {
        "passed": not failed,
        "C": C,
        "eps": eps,
        "max_ratio": worst["max_ratio"],
        "witness_level": witness["j"],
        "witness_k": witness["witness_k"],
        "failed_levels": failed,
        "per_level": [{k: r[k] for k in ("j", "t_next", "max_ratio", "witness_k", "passed")}
                      for r in per_level],
    }


def sigma_recursion_check(states: Sequence[DyadicState], tol: float = 1e-12) -> Dict:
    """σ² recursion against direct sums, and the σ² bound at every level.

    The bound checked is σ²_j ≤ (1 + #doublings)/(t_1⋯t_j); the sharper n/(t_1⋯t_j)
    fails at the first level (σ_1² = 2 − √2 > 1/2) and is reported separately.
    """
    if len(states) < 2:
        raise ValueError("need at least two levels")
    report = {"passed": True, "witness_level": None, "max_recursion_error": 0.0,
              "bound_holds": True, "sharp_bound_levels_failed": []}
    for prev, nxt in zip(states, states[1:]):
        direct = _sigma_sq(nxt.weights)
        if nxt.t[-1] == 1:
            predicted = prev.sigma_sq
        else:
            predicted = prev.sigma_sq / 2.0 + SPLIT_GAIN * heavy_mass(prev) ** 2
        error = abs(direct - predicted)
        report["max_recursion_error"] = max(report["max_recursion_error"], error)
        if error > tol and report["passed"]:
            report["passed"] = False
            report["witness_level"] = nxt.j
        product = 2 ** nxt.doublings
        if direct > (1 + nxt.doublings) / product + tol:
            report["bound_holds"] = False
            report["passed"] = False
            report["witness_level"] = report["witness_level"] or nxt.j
        if direct > nxt.doublings / product + tol:
            report["sharp_bound_levels_failed"].append(nxt.j)
    return report


# ─────────────────────────────
# Tapered measure ψ·dμ
# ─────────────────────────────
def taper_delta(t: Sequence[int]) -> float:
    """δ = 2^{−j0}, j0 the level of the second doubling."""
    seen = 0
    for j, tj in enumerate(t, start=1):
        if tj == 2:
            seen += 1
            if seen == 2:
                return 2.0 ** -j
    raise ValueError("sequence has fewer than two doublings")


def taper(x, delta: float) -> np.ndarray:
    """ψ = 1 on [δ, 1−δ], C^∞, vanishing outside (0, 1)."""
    x = np.asarray(x, dtype=float)
    return smooth_step(x / delta) * smooth_step((1.0 - x) / delta)


def taper_weights(state: DyadicState, delta: float, nodes_per_cell: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Interior mask and ∫ψ over each cell relative to the cell mass."""
    h = 2.0 ** -state.j
    starts = state.nodes * h
    interior = (starts >= delta) & (starts + h <= 1.0 - delta)
    t, w = leggauss(nodes_per_cell)
    x = starts[:, None] + 0.5 * h * (t[None, :] + 1.0)
    share = 0.5 * (taper(x, delta) @ w)
    return interior, np.where(interior, 1.0, share)


def tapered_fourier(state: DyadicState, xi, delta: Optional[float] = None,
                    nodes_per_cell: int = 32) -> np.ndarray:
    """Transform of ψ·φ_j: closed form on interior cells, Gauss–Legendre on transition cells."""
    delta = taper_delta(state.t) if delta is None else delta
    xi = np.asarray(xi, dtype=float)
    flat = xi.ravel()
    h = 2.0 ** -state.j
    starts = state.nodes * h
    interior, _ = taper_weights(state, delta, nodes_per_cell)

    density = 2.0 ** state.j * state.weights
    out = np.zeros(flat.size, dtype=complex)
    if interior.any():
        inner = StepDensity.from_cells(state.j, state.nodes[interior], state.weights[interior],
                                       tag="taper_interior")
        out += fourier_step_many(inner, flat)
    edge = ~interior
    if edge.any():
        t, w = leggauss(nodes_per_cell)
        grid = starts[edge][:, None] + 0.5 * h * (t[None, :] + 1.0)
        wx = (0.5 * h * w[None, :] * density[edge][:, None] * taper(grid, delta)).ravel()
        x = grid.ravel()
        out += np.exp(-2j * np.pi * np.outer(flat, x)) @ wx
    return out.reshape(xi.shape)
