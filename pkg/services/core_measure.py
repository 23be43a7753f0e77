"""Measures, their Fourier transforms, and the exponent-fitting harness.

Every construction in the lab reduces to one of three exact representations:

* ``AtomicMeasure``: a finite weighted sum of point masses,
* ``StepDensity``: a level-j dyadic piecewise-constant density,
* ``ProductMeasure``: an ordered list of atomic factors whose convolution is the measure.

On top of those sit the measurement tools shared by all constructions: dyadic band
envelopes of |μ̂| with a least-squares decay exponent, closed-ball masses with a
power-law fit, and an independent midpoint-rule quadrature used as a cross-check.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import linregress

from config import config
from services.bump_function import phi0
from utils.rng import make_rng

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
MASS_TOL = 1e-12
# bands whose envelope is below this fraction of the largest envelope are degenerate
DEGENERATE_FRACTION = 1e-9

Evaluator = Callable[[np.ndarray], np.ndarray]


class MeasureError(Exception):
    """Invalid measure or failed evaluation"""
    pass


class FitError(Exception):
    """Exponent fit impossible on the given profile"""
    pass


class QuadratureGuardError(Exception):
    """Quadrature resolution too low for the requested frequency"""
    pass


# ─────────────────────────────
# Domain Types
# ─────────────────────────────
@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite weighted sum of point masses, positions strictly increasing."""
    positions: np.ndarray
    weights: np.ndarray
    support_hint: Tuple[float, float]
    tag: str = ""
    flags: Tuple[str, ...] = ()

    @classmethod
    def from_atoms(cls, positions, weights, support_hint: Optional[Tuple[float, float]] = None,
                   tag: str = "", flags: Sequence[str] = ()) -> "AtomicMeasure":
        """Sort atoms and merge coincident positions."""
        positions = np.asarray(positions, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if positions.shape != weights.shape:
            raise MeasureError("positions and weights differ in length")
        if not np.all(np.isfinite(positions)) or not np.all(np.isfinite(weights)):
            raise MeasureError("non-finite atom")
        if np.any(weights < 0):
            raise MeasureError("negative weight")

        unique, inverse = np.unique(positions, return_inverse=True)
        if unique.size != positions.size:
            weights = np.bincount(inverse, weights=weights, minlength=unique.size)
        else:
            order = np.argsort(positions, kind="stable")
            weights = weights[order]
        positions = unique

        if support_hint is None:
            support_hint = (float(positions[0]), float(positions[-1])) if positions.size else (0.0, 0.0)
        elif positions.size and (positions[0] < support_hint[0] or positions[-1] > support_hint[1]):
            raise MeasureError(f"atoms outside support hint {support_hint}")
        return cls(positions, weights, (float(support_hint[0]), float(support_hint[1])), tag, tuple(flags))

    @classmethod
    def empty(cls, support_hint: Tuple[float, float] = (0.0, 0.0), tag: str = "") -> "AtomicMeasure":
        return cls(np.zeros(0), np.zeros(0), support_hint, tag, ("empty",))

    @property
    def size(self) -> int:
        return int(self.positions.size)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    def scaled(self, factor: float) -> "AtomicMeasure":
        if factor <= 0:
            raise MeasureError("scale factor must be positive")
        return AtomicMeasure(self.positions, self.weights * factor, self.support_hint, self.tag, self.flags)

    def restricted(self, lo: float, hi: float) -> "AtomicMeasure":
        """Restriction to the closed interval [lo, hi]."""
        i = np.searchsorted(self.positions, lo, side="left")
        j = np.searchsorted(self.positions, hi, side="right")
        return AtomicMeasure(self.positions[i:j], self.weights[i:j], (lo, hi), self.tag, self.flags)

    def with_flags(self, *flags: str) -> "AtomicMeasure":
        return AtomicMeasure(self.positions, self.weights, self.support_hint, self.tag, self.flags + flags)

    def to_dict(self) -> Dict:
        return {
            "atoms": [[x, w] for x, w in self.atoms],
            "support_hint": list(self.support_hint),
            "tag": self.tag,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "AtomicMeasure":
        atoms = data.get("atoms", [])
        if not atoms:
            return cls.empty(tuple(data.get("support_hint", (0.0, 0.0))), data.get("tag", ""))
        positions, weights = zip(*atoms)
        return cls.from_atoms(positions, weights, tuple(data["support_hint"]),
                              data.get("tag", ""), data.get("flags", ()))


@dataclass(frozen=True, eq=False)
class StepDensity:
    """Level-j dyadic step density; cell [n/2^j, (n+1)/2^j) carries mass weights[i]."""
    level: int
    nodes: np.ndarray
    weights: np.ndarray
    total_mass: float = 1.0
    tag: str = ""

    @classmethod
    def from_cells(cls, level: int, nodes, weights, total_mass: Optional[float] = None,
                   tag: str = "") -> "StepDensity":
        if level < 0:
            raise MeasureError("level must be nonnegative")
        nodes = np.asarray(nodes, dtype=np.int64).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if nodes.shape != weights.shape:
            raise MeasureError("nodes and weights differ in length")
        if nodes.size and (nodes.min() < 0 or nodes.max() >= (1 << level)):
            raise MeasureError(f"node outside level-{level} grid")
        if np.any(weights < 0):
            raise MeasureError("negative cell weight")
        order = np.argsort(nodes, kind="stable")
        nodes, weights = nodes[order], weights[order]
        if np.any(np.diff(nodes) == 0):
            raise MeasureError("duplicate dyadic node")
        mass = math.fsum(weights)
        if total_mass is None:
            total_mass = mass
        elif abs(mass - total_mass) > MASS_TOL * max(1.0, abs(total_mass)):
            raise MeasureError(f"cell weights sum to {mass!r}, declared {total_mass!r}")
        return cls(level, nodes, weights, float(total_mass), tag)

    @property
    def cell_width(self) -> float:
        return 2.0 ** -self.level

    @property
    def positions(self) -> np.ndarray:
        return self.nodes * self.cell_width

    @property
    def cells(self) -> Dict[float, float]:
        return dict(zip(self.positions.tolist(), self.weights.tolist()))

    def cdf(self, y) -> np.ndarray:
        """Mass of (−∞, y]."""
        y = np.asarray(y, dtype=float)
        starts = self.positions
        before = np.concatenate(([0.0], np.cumsum(self.weights)))
        idx = np.searchsorted(starts, y, side="right") - 1
        safe = np.clip(idx, 0, max(starts.size - 1, 0))
        frac = np.clip((y - starts[safe]) / self.cell_width, 0.0, 1.0)
        value = before[safe] + self.weights[safe] * frac
        return np.where(idx < 0, 0.0, value)

    def density(self, x) -> np.ndarray:
        """Density value 2^j·p at x (right-open cells)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.positions, x, side="right") - 1
        safe = np.clip(idx, 0, max(self.nodes.size - 1, 0))
        inside = (idx >= 0) & (x < self.positions[safe] + self.cell_width)
        return np.where(inside, self.weights[safe] * 2.0 ** self.level, 0.0)

    def as_atoms(self) -> AtomicMeasure:
        """Cell masses placed at cell centres."""
        centres = (self.nodes + 0.5) * self.cell_width
        return AtomicMeasure.from_atoms(centres, self.weights, (0.0, 1.0), self.tag)

    def to_dict(self) -> Dict:
        return {
            "level": self.level,
            "cells": [[int(n), float(w)] for n, w in zip(self.nodes, self.weights)],
            "total_mass": self.total_mass,
            "tag": self.tag,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "StepDensity":
        cells = data.get("cells", [])
        nodes = [c[0] for c in cells]
        weights = [c[1] for c in cells]
        return cls.from_cells(data["level"], nodes, weights, data.get("total_mass"), data.get("tag", ""))


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    """Ordered atomic factors ν_1,…,ν_K; the measure is their convolution."""
    factors: Tuple[AtomicMeasure, ...]
    support: Tuple[float, float] = (0.0, 1.0)
    envelope: Optional[Evaluator] = None
    envelope_name: str = ""
    tag: str = ""

    def __post_init__(self):
        for k, factor in enumerate(self.factors, start=1):
            if abs(factor.total_mass - 1.0) > MASS_TOL:
                raise MeasureError(f"factor {k} has mass {factor.total_mass!r}")
        lo = sum(float(f.positions[0]) for f in self.factors)
        hi = sum(float(f.positions[-1]) for f in self.factors)
        if self.factors and (lo < self.support[0] or hi > self.support[1]):
            raise MeasureError(f"convolution support [{lo}, {hi}] leaves {self.support}")

    @property
    def atom_count(self) -> int:
        return int(np.prod([f.size for f in self.factors], dtype=object)) if self.factors else 1

    def to_dict(self) -> Dict:
        return {
            "factors": [f.to_dict() for f in self.factors],
            "envelope": self.envelope_name or None,
            "support": list(self.support),
            "tag": self.tag,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ProductMeasure":
        if data.get("envelope"):
            raise MeasureError("envelope transforms are not serializable; rebuild from config")
        factors = tuple(AtomicMeasure.from_dict(f) for f in data["factors"])
        return cls(factors, tuple(data.get("support", (0.0, 1.0))), tag=data.get("tag", ""))


@dataclass
class FourierProfile:
    """Dyadic band envelopes of |μ̂| and the fitted decay exponent."""
    bands: List[Tuple[int, float]]
    fitted_beta: Optional[float] = None
    slack_epsilon: Optional[float] = None
    residual: Optional[float] = None
    stderr: Optional[float] = None
    fit_bands: List[int] = field(default_factory=list)
    sampling: str = "grid"
    samples_per_band: int = 0
    seed: Optional[int] = None
    tag: str = ""
    flags: List[str] = field(default_factory=list)
    # band means of |μ̂|², filled by lattice sampling
    band_power: List[Tuple[int, float]] = field(default_factory=list)
    statistic: str = "sup"

    def to_dict(self) -> Dict:
        return {
            "bands": [[int(m), float(e)] for m, e in self.bands],
            "band_power": [[int(m), float(p)] for m, p in self.band_power],
            "statistic": self.statistic,
            "fitted_beta": self.fitted_beta,
            "slack_epsilon": self.slack_epsilon,
            "residual": self.residual,
            "stderr": self.stderr,
            "fit_bands": list(self.fit_bands),
            "sampling": self.sampling,
            "samples_per_band": self.samples_per_band,
            "seed": self.seed,
            "tag": self.tag,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "FourierProfile":
        return cls(
            bands=[(int(m), float(e)) for m, e in data.get("bands", [])],
            band_power=[(int(m), float(p)) for m, p in data.get("band_power", [])],
            statistic=data.get("statistic", "sup"),
            fitted_beta=data.get("fitted_beta"),
            slack_epsilon=data.get("slack_epsilon"),
            residual=data.get("residual"),
            stderr=data.get("stderr"),
            fit_bands=list(data.get("fit_bands", [])),
            sampling=data.get("sampling", "grid"),
            samples_per_band=data.get("samples_per_band", 0),
            seed=data.get("seed"),
            tag=data.get("tag", ""),
            flags=list(data.get("flags", [])),
        )

    def csv_rows(self) -> List[Tuple]:
        return [("m", "envelope")] + [(m, e) for m, e in self.bands]


@dataclass
class BallProfile:
    """Ball masses on a decreasing radius grid and the fitted power-law exponent."""
    samples: List[Tuple[float, float, float]]
    fitted_alpha: Optional[float]
    side: str
    stderr: Optional[float] = None
    intercept: Optional[float] = None
    tag: str = ""
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "samples": [[float(x), float(r), float(m)] for x, r, m in self.samples],
            "fitted_alpha": self.fitted_alpha,
            "side": self.side,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "tag": self.tag,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "BallProfile":
        return cls(
            samples=[tuple(s) for s in data.get("samples", [])],
            fitted_alpha=data.get("fitted_alpha"),
            side=data["side"],
            stderr=data.get("stderr"),
            intercept=data.get("intercept"),
            tag=data.get("tag", ""),
            flags=list(data.get("flags", [])),
        )

    def csv_rows(self) -> List[Tuple]:
        return [("x", "r", "mass")] + [tuple(s) for s in self.samples]


# ─────────────────────────────
# Fourier Transforms
# ─────────────────────────────
def fourier_atomic(m: AtomicMeasure, xi: float) -> complex:
    """Σ_j w_j·e^{−2πi x_j ξ}."""
    if m.size == 0:
        raise MeasureError("empty measure")
    if xi == 0:
        return complex(m.total_mass, 0.0)
    phase = TWO_PI * xi * m.positions
    if m.size > config.COMPENSATED_SUM_THRESHOLD:
        re = math.fsum(m.weights * np.cos(phase))
        im = -math.fsum(m.weights * np.sin(phase))
        return complex(re, im)
    return complex(np.sum(m.weights * np.exp(-1j * phase)))


def fourier_atomic_many(m: AtomicMeasure, xi, chunk_entries: int = 1 << 22) -> np.ndarray:
    """Vectorized fourier_atomic over an array of frequencies."""
    if m.size == 0:
        raise MeasureError("empty measure")
    xi = np.asarray(xi, dtype=float)
    flat = xi.ravel()
    out = np.empty(flat.size, dtype=complex)
    compensated = m.size > config.COMPENSATED_SUM_THRESHOLD
    rows = max(1, chunk_entries // m.size)
    for start in range(0, flat.size, rows):
        block = flat[start:start + rows]
        phase = TWO_PI * np.outer(block, m.positions)
        if compensated:
            cos_terms = np.cos(phase) * m.weights
            sin_terms = np.sin(phase) * m.weights
            out[start:start + rows] = [complex(math.fsum(c), -math.fsum(s))
                                       for c, s in zip(cos_terms, sin_terms)]
        else:
            out[start:start + rows] = np.exp(-1j * phase) @ m.weights
    out[flat == 0] = m.total_mass
    return out.reshape(xi.shape)


def _cell_prefactor(xi: np.ndarray, level: int) -> np.ndarray:
    """(1 − e^{−2πiξ/2^j}) / (2πiξ/2^j), equal to 1 at ξ = 0."""
    z = TWO_PI * xi / 2.0 ** level
    safe = np.where(z == 0, 1.0, z)
    value = (1.0 - np.exp(-1j * safe)) / (1j * safe)
    return np.where(z == 0, 1.0 + 0j, value)


def fourier_step(d: StepDensity, k: Union[int, float]) -> complex:
    """Closed-form transform of a dyadic step density at an integer or real frequency."""
    return complex(fourier_step_many(d, np.array([k]))[0])


def fourier_step_many(d: StepDensity, ks, chunk_entries: int = 1 << 22) -> np.ndarray:
    """Vectorized fourier_step; integer inputs use exact modular phase reduction."""
    ks = np.asarray(ks)
    flat = ks.ravel()
    out = np.empty(flat.size, dtype=complex)
    if d.nodes.size == 0:
        return np.zeros(ks.shape, dtype=complex)
    integer = np.issubdtype(flat.dtype, np.integer)
    modulus = 1 << d.level
    rows = max(1, chunk_entries // d.nodes.size)
    for start in range(0, flat.size, rows):
        block = flat[start:start + rows]
        if integer:
            residues = (np.mod(block.astype(np.int64), modulus)[:, None] * d.nodes[None, :]) % modulus
            phase = TWO_PI * residues / modulus
        else:
            phase = TWO_PI * np.outer(block.astype(float), d.positions)
        sums = np.exp(-1j * phase) @ d.weights
        out[start:start + rows] = _cell_prefactor(block.astype(float), d.level) * sums
    if integer:
        # χ of a dyadic cell kills nonzero multiples of 2^j
        killed = (flat != 0) & (np.mod(flat, modulus) == 0)
        out[killed] = 0.0
    out[flat == 0] = d.total_mass
    return out.reshape(ks.shape)


def fourier_product(p: ProductMeasure, xi: float) -> complex:
    """Π_k ν̂_k(ξ), times the envelope transform when present."""
    value = complex(1.0, 0.0)
    for factor in p.factors:
        value *= fourier_atomic(factor, xi)
    if p.envelope is not None:
        value *= complex(np.asarray(p.envelope(np.array([xi])))[0])
    return value


def fourier_product_many(p: ProductMeasure, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    value = np.ones(xi.shape, dtype=complex)
    for factor in p.factors:
        value *= fourier_atomic_many(factor, xi)
    if p.envelope is not None:
        value *= p.envelope(xi)
    return value


def expand_convolution(p: ProductMeasure, max_atoms: int = 1_000_000) -> AtomicMeasure:
    """Explicit convolution of all factors (oracle path only)."""
    if p.atom_count > max_atoms:
        raise MeasureError(f"expanded atom count {p.atom_count} exceeds {max_atoms}")
    positions = np.zeros(1)
    weights = np.ones(1)
    for factor in p.factors:
        positions = np.add.outer(positions, factor.positions).ravel()
        weights = np.multiply.outer(weights, factor.weights).ravel()
    return AtomicMeasure.from_atoms(positions, weights, p.support, p.tag)


# ─────────────────────────────
# Decay Profiles
# ─────────────────────────────
STATISTICS = ("sup", "mean_square")


def _nested_unit_points(n: int, rng: np.random.Generator) -> np.ndarray:
    """First n points of a nested stratified draw in [0, 1).

    Each doubling adds one uniform point to the empty half of every occupied stratum, so at
    power-of-two sizes every dyadic stratum holds one point, and a smaller draw is always a
    prefix of a larger one.
    """
    points = rng.random(1)
    width = 1.0
    while points.size < n:
        half = width / 2.0
        start = np.floor(points / width) * width
        in_lower = points - start < half
        fresh = start + np.where(in_lower, half, 0.0) + half * rng.random(points.size)
        points = np.concatenate([points, fresh])
        width = half
    return points[:n]


def band_frequencies(m: int, samples_per_band: int, sampling: str, seed: Optional[int]) -> np.ndarray:
    """Sample points of the band 2^m ≤ ξ < 2^{m+1}.

    ``lattice`` returns every integer of the band and ignores samples_per_band.
    """
    if sampling == "lattice":
        if m < 0:
            raise MeasureError("lattice sampling needs m ≥ 0")
        return np.arange(1 << m, 1 << (m + 1), dtype=np.int64)
    if sampling == "grid":
        offsets = np.arange(samples_per_band, dtype=float)
        return 2.0 ** m * (1.0 + offsets / samples_per_band)
    if sampling == "jittered":
        if seed is None:
            raise MeasureError("jittered sampling needs a seed")
        return 2.0 ** m * (1.0 + _nested_unit_points(samples_per_band, make_rng(seed, "band", m)))
    raise MeasureError(f"unknown sampling mode {sampling!r}")


def band_envelope(evaluator: Evaluator, m_min: int, m_max: int,
                  samples_per_band: Optional[int] = None, sampling: Optional[str] = None,
                  seed: Optional[int] = None, discard_low_bands: Optional[int] = None,
                  tag: str = "", statistic: str = "sup") -> FourierProfile:
    """Max of |μ̂| per dyadic band, followed by a decay fit when enough bands are usable.

    With ``statistic="mean_square"`` the fit runs on the band mean of |μ̂|² instead of the
    envelope; that needs lattice sampling so every band is covered exactly.
    """
    samples_per_band = samples_per_band or config.BAND_SAMPLES
    sampling = sampling or config.BAND_SAMPLING
    if m_min > m_max:
        raise MeasureError(f"empty band range [{m_min}, {m_max}]")
    if statistic not in STATISTICS:
        raise MeasureError(f"unknown statistic {statistic!r}")
    if statistic == "mean_square" and sampling != "lattice":
        raise MeasureError("mean_square statistic needs lattice sampling")
    if sampling == "lattice":
        samples_per_band = 0
    elif samples_per_band < 16:
        raise MeasureError("samples_per_band must be at least 16")

    bands, power = [], []
    for m in range(m_min, m_max + 1):
        xi = band_frequencies(m, samples_per_band, sampling, seed)
        try:
            values = np.abs(np.asarray(evaluator(xi)))
        except Exception as e:
            raise MeasureError(f"evaluator failed in band {m}: {e}") from e
        bands.append((m, float(values.max())))
        if sampling == "lattice":
            power.append((m, float(np.mean(values ** 2))))

    profile = FourierProfile(bands=bands, sampling=sampling, samples_per_band=samples_per_band,
                             seed=seed if sampling == "jittered" else None, tag=tag,
                             band_power=power, statistic=statistic)
    try:
        fit_decay_exponent(profile, discard_low_bands)
    except FitError as e:
        logger.info(f"No decay fit for {tag or 'profile'}: {e}")
        profile.flags.append("degenerate_fit")
    return profile


def fit_decay_exponent(profile: FourierProfile, discard_low_bands: Optional[int] = None) -> Tuple[float, float]:
    """Least-squares slope of −2·log2(envelope) against m.

    Mean-square profiles fit −log2(band mean of |μ̂|²), which carries the same exponent
    without the extreme-value growth of a maximum over 2^m frequencies.
    """
    discard = config.DISCARD_LOW_BANDS if discard_low_bands is None else discard_low_bands
    if profile.statistic == "mean_square":
        source, power = profile.band_power, 1.0
    else:
        source, power = profile.bands, 2.0
    bands = sorted(source)[discard:]
    peak = max((e for _, e in bands), default=0.0)
    usable = [(m, e) for m, e in bands if e > DEGENERATE_FRACTION * peak and e > 0]
    if len(usable) < len(bands) and "degenerate_bands" not in profile.flags:
        profile.flags.append("degenerate_bands")
    if len(usable) < 4:
        raise FitError(f"too few bands: {len(usable)} usable after discarding {discard}")

    m = np.array([b[0] for b in usable], dtype=float)
    y = -power * np.log2(np.array([b[1] for b in usable]))
    fit = linregress(m, y)
    predicted = fit.intercept + fit.slope * m
    # ε with envelope ≤ C·|ξ|^{−β/2+ε} per band, relative to the fitted line
    per_band = (predicted - y) / (2.0 * np.maximum(m, 1.0))

    profile.fitted_beta = float(fit.slope)
    profile.stderr = float(fit.stderr)
    profile.slack_epsilon = float(max(0.0, per_band.max()))
    profile.residual = float(np.sqrt(np.mean((y - predicted) ** 2)))
    profile.fit_bands = [int(v) for v in m]
    return profile.fitted_beta, profile.stderr


# ─────────────────────────────
# Ball Masses
# ─────────────────────────────
def ball_mass(measure: Union[AtomicMeasure, StepDensity], x: float, r: float) -> float:
    """Mass of the closed ball [x − r, x + r]."""
    if r <= 0:
        raise MeasureError("radius must be positive")
    if isinstance(measure, StepDensity):
        hi, lo = measure.cdf(np.array([x + r, x - r]))
        return float(max(hi - lo, 0.0))
    i = np.searchsorted(measure.positions, x - r, side="left")
    j = np.searchsorted(measure.positions, x + r, side="right")
    return math.fsum(measure.weights[i:j])


def ball_mass_many(measure: Union[AtomicMeasure, StepDensity], xs, r: float) -> np.ndarray:
    """ball_mass over an array of centres at one radius."""
    if r <= 0:
        raise MeasureError("radius must be positive")
    xs = np.asarray(xs, dtype=float)
    if isinstance(measure, StepDensity):
        return np.maximum(measure.cdf(xs + r) - measure.cdf(xs - r), 0.0)
    cumulative = np.concatenate(([0.0], np.cumsum(measure.weights)))
    i = np.searchsorted(measure.positions, xs - r, side="left")
    j = np.searchsorted(measure.positions, xs + r, side="right")
    return np.maximum(cumulative[j] - cumulative[i], 0.0)


def _support_of(measure: Union[AtomicMeasure, StepDensity]) -> Tuple[float, float]:
    if isinstance(measure, StepDensity):
        return 0.0, 1.0
    return measure.support_hint


def fit_ball_exponents(measure: Union[AtomicMeasure, StepDensity], centers, radii,
                       side: str = "lower", tag: str = "") -> BallProfile:
    """Power-law fit of max_x μ(B(x, r)) against r.

    ``lower`` maximizes over the given centres (a lower bound on sup_x μ(B(x, r)));
    ``upper`` adds a covering grid of spacing r over the support, so every ball of
    radius r/2 sits inside one of the measured balls.
    """
    if side not in ("lower", "upper"):
        raise MeasureError(f"unknown side {side!r}")
    radii = sorted((float(r) for r in radii), reverse=True)
    if len(radii) < 4:
        raise FitError("at least 4 radii are required")
    centers = np.asarray(centers, dtype=float).ravel()
    lo, hi = _support_of(measure)

    samples = []
    for r in radii:
        pool = centers
        if side == "upper":
            grid = np.arange(lo, hi + r, r)
            pool = np.concatenate((centers, grid))
        if pool.size == 0:
            raise MeasureError("no centres to evaluate")
        masses = ball_mass_many(measure, pool, r)
        best = int(np.argmax(masses))
        samples.append((float(pool[best]), r, float(masses[best])))

    profile = BallProfile(samples=samples, fitted_alpha=None, side=side, tag=tag)
    positive = [(r, m) for _, r, m in samples if m > 0]
    if not positive:
        profile.flags.append("degenerate")
        return profile
    if len(positive) < len(samples):
        profile.flags.append("zero_mass_radii")
    if len(positive) < 2:
        profile.flags.append("degenerate")
        return profile

    fit = linregress(np.log([r for r, _ in positive]), np.log([m for _, m in positive]))
    profile.fitted_alpha = float(fit.slope)
    profile.stderr = float(fit.stderr)
    profile.intercept = float(fit.intercept)
    return profile


# ─────────────────────────────
# Constructions and Oracles
# ─────────────────────────────
def one_line_taper(x, x0: float) -> np.ndarray:
    """ψ(x) = φ_0(x)·(x − x0)²."""
    x = np.asarray(x, dtype=float)
    return phi0(x) * (x - x0) ** 2


def one_line_combine(nu: AtomicMeasure, x0: float, atol: float = 1e-12) -> AtomicMeasure:
    """dν(x + 1) + ψ(x)dν(x) on [−1, 1]."""
    if nu.size == 0:
        raise MeasureError("empty measure")
    if nu.positions[0] < 0 or nu.positions[-1] > 1:
        raise MeasureError("nu must be supported in [0, 1]")
    if not np.any(np.abs(nu.positions - x0) <= atol):
        raise MeasureError(f"x0={x0} outside support")

    taper = one_line_taper(nu.positions, x0)
    positions = np.concatenate((nu.positions - 1.0, nu.positions))
    weights = np.concatenate((nu.weights, taper * nu.weights))
    flags = ["unbounded_derivative"]
    if math.fsum(taper * nu.weights) == 0.0:
        flags.append("degenerate")
        logger.warning(f"One-line combination degenerate: ∫ψdν = 0 at x0={x0}")
    return AtomicMeasure.from_atoms(positions, weights, (-1.0, 1.0), nu.tag + "+one_line", flags)


def quadrature_oracle(density: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      xi: float, resolution: int) -> complex:
    """Composite midpoint rule for ∫_a^b f(x)e^{−2πixξ}dx.

    Error is O(resolution^{−2}·(1 + |ξ|)²) for smooth f; on a cell of width h the rule
    scales e^{−2πixξ} by (πξh)/sin(πξh), so the relative error is about (πξh)²/6.
    """
    if resolution < config.QUADRATURE_MIN_RESOLUTION:
        raise QuadratureGuardError(f"resolution {resolution} below {config.QUADRATURE_MIN_RESOLUTION}")
    if resolution < 64 * (b - a) * abs(xi):
        raise QuadratureGuardError(f"resolution {resolution} too low for |ξ|={abs(xi)} on [{a}, {b}]")

    h = (b - a) / resolution
    chunk = config.QUADRATURE_CHUNK
    re_parts, im_parts = [], []
    for start in range(0, resolution, chunk):
        idx = np.arange(start, min(start + chunk, resolution), dtype=float)
        x = a + (idx + 0.5) * h
        f = np.asarray(density(x), dtype=float)
        phase = TWO_PI * xi * x
        re_parts.append(float(np.sum(f * np.cos(phase))))
        im_parts.append(-float(np.sum(f * np.sin(phase))))
    return complex(math.fsum(re_parts) * h, math.fsum(im_parts) * h)


def energy_integral(measure: AtomicMeasure, t: float, chunk: int = 1024) -> float:
    """I_t(μ) = ΣΣ_{x≠y} w_x w_y |x − y|^{−t}."""
    if measure.size > 20_000:
        raise MeasureError("energy integral limited to 20000 atoms")
    x, w = measure.positions, measure.weights
    total = []
    for start in range(0, x.size, chunk):
        diff = np.abs(x[start:start + chunk, None] - x[None, :])
        with np.errstate(divide="ignore"):
            kernel = np.where(diff > 0, diff ** -t, 0.0)
        total.append(float(w[start:start + chunk] @ kernel @ w))
    return math.fsum(total)
