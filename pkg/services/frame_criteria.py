"""Numerical instantiations of sufficient conditions for the absence of Fourier frames.

Every verdict is either ``no_frame_indicated`` or ``inconclusive``: the inputs are fitted
exponents and finite truncations, so a report is evidence, never a proof.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from services.core_measure import AtomicMeasure, BallProfile, FourierProfile, fourier_atomic_many

logger = logging.getLogger(__name__)

NO_FRAME = "no_frame_indicated"
INCONCLUSIVE = "inconclusive"
DISCLAIMER = ("Numerical instantiation of a sufficient condition on a finite truncation; "
              "it indicates, and does not prove, the absence of a Fourier frame.")
# cos(2π/10) bounds the phase drift inside a ball of radius r for |ξ| ≤ 1/(10r)
SHI_COSINE = math.cos(math.pi / 5.0)


class CriterionInputError(Exception):
    """Criterion inputs are inconsistent"""
    pass


@dataclass
class CriterionReport:
    criterion: str
    verdict: str
    inputs: Dict = field(default_factory=dict)
    constants: Dict = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    disclaimer: str = DISCLAIMER

    def to_dict(self) -> Dict:
        return {
            "criterion": self.criterion,
            "verdict": self.verdict,
            "inputs": self.inputs,
            "constants": self.constants,
            "flags": self.flags,
            "disclaimer": self.disclaimer,
        }


def _closed_form_ratios(ratios: Sequence[float]) -> bool:
    return all(math.isclose(r, (N + 1) * (N + 2) / 2.0, rel_tol=1e-9)
               for N, r in enumerate(ratios, start=1))


def uniformity_verdict(ratios: Sequence[float], threshold: float = 10.0,
                       min_increment: float = 1.0) -> CriterionReport:
    """Divergence proxy for max/min weight-product ratios.

    No frame is indicated when the last ratio exceeds ``threshold`` and every increment
    over the second half of the sequence is at least ``min_increment``.
    """
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise CriterionInputError("empty ratio sequence")
    tail = np.diff(ratios[len(ratios) // 2:]) if len(ratios) > 1 else np.zeros(0)
    growing = tail.size > 0 and float(tail.min()) >= min_increment
    verdict = NO_FRAME if ratios[-1] > threshold and growing else INCONCLUSIVE
    report = CriterionReport(
        "uniformity", verdict,
        inputs={"ratios": ratios, "threshold": threshold, "min_increment": min_increment},
        constants={"last_ratio": ratios[-1], "min_tail_increment": float(tail.min()) if tail.size else None},
    )
    if _closed_form_ratios(ratios):
        report.constants["closed_form"] = "(N+1)(N+2)/2"
    return report


def heavy_decay_verdict(ball: BallProfile, fourier: FourierProfile, margin: float = 0.1) -> CriterionReport:
    """Heavy balls (sup_x μ(B(x, r)) ≳ r^α) against decay |μ̂| ≲ |ξ|^{−β/2} with α < β."""
    if ball.tag and fourier.tag and ball.tag != fourier.tag:
        raise CriterionInputError(f"profiles from different measures: {ball.tag!r} vs {fourier.tag!r}")
    if ball.side != "lower":
        raise CriterionInputError("heavy-ball input must be a lower-side ball profile")
    if ball.fitted_alpha is None or fourier.fitted_beta is None:
        raise CriterionInputError("both profiles need fitted exponents")

    alpha, beta = ball.fitted_alpha, fourier.fitted_beta
    se_alpha, se_beta = ball.stderr or 0.0, fourier.stderr or 0.0
    report = CriterionReport(
        "heavy_decay", INCONCLUSIVE,
        inputs={"alpha": alpha, "alpha_stderr": se_alpha, "beta": beta, "beta_stderr": se_beta,
                "tag": ball.tag},
        constants={"gap": (beta - se_beta) - (alpha + se_alpha)},
    )
    if alpha < beta / 2.0 - margin:
        # a ball bound below β/2 contradicts the decay itself, so the fits are suspect
        report.flags.append("suspicious_ball_exponent")
        logger.warning(f"α̂={alpha:.3f} below β̂/2 − {margin} for {ball.tag or 'measure'}")
        return report
    if alpha + se_alpha < beta - se_beta:
        report.verdict = NO_FRAME
    return report


def shi_counting_check(measure: AtomicMeasure, x0: float, r: float, Lambda: Sequence[float],
                       B_est: float, samples: int = 257) -> Dict:
    """Cosine lower bound on the ball-restricted transform and the implied count ceiling."""
    if r <= 0:
        raise CriterionInputError("radius must be positive")
    ball = measure.restricted(x0 - r, x0 + r)
    mass = ball.total_mass
    R = 1.0 / (10.0 * r)
    report = {"x0": x0, "r": r, "R": R, "ball_mass": mass}
    if mass == 0.0:
        report.update({"passed": True, "flags": ["empty_ball"]})
        return report

    xi = np.linspace(-R, R, samples)
    shifted = AtomicMeasure.from_atoms(ball.positions - x0, ball.weights)
    values = np.abs(fourier_atomic_many(shifted, xi))
    lam = np.asarray(Lambda, dtype=float)
    count = int(np.count_nonzero(np.abs(lam) <= R))
    ceiling = 4.0 * B_est / mass
    report.update({
        "min_ratio": float(values.min() / mass),
        "cosine_bound": SHI_COSINE,
        "passed": bool(values.min() >= 0.5 * mass * (1.0 - 1e-12)),
        "count": count,
        "count_ceiling": ceiling,
        "count_consistent": count <= ceiling,
    })
    return report


def _refined_integral(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, start: int,
                      rel_change: float, max_points: int) -> Tuple[float, bool]:
    """Midpoint rule doubled until the relative change drops below rel_change."""
    n = start
    previous = None
    while True:
        h = (b - a) / n
        x = a + (np.arange(n) + 0.5) * h
        value = float(np.sum(f(x))) * h
        if previous is not None and abs(value - previous) <= rel_change * max(abs(value), 1e-300):
            return value, True
        if 2 * n > max_points:
            return value, False
        previous = value
        n *= 2


def integral_criteria(evaluator: Callable[[np.ndarray], np.ndarray], alpha: float, gamma: float, C: float,
                      R_set: Sequence[float], lambda_set: Optional[Sequence[float]] = None,
                      rel_change: float = 0.05, max_points: int = 1 << 22) -> Tuple[CriterionReport, CriterionReport]:
    """Finite proxies for the two integral criteria.

    lev: min over R of R^{−(1−α)}∫_{|ξ|<R}|μ̂|²; illw: min over λ of |λ|^{−γ}∫_{|ξ|≤C}|μ̂(λ+ξ)|².
    Both are reported only; the criteria are sufficient conditions and carry no verdict here.
    """
    if C <= 0 or any(R <= 0 for R in R_set):
        raise CriterionInputError("integration ranges must be positive")
    lambda_set = list(lambda_set) if lambda_set is not None else [2.0 ** m for m in range(1, 11)]

    def energy(x):
        return np.abs(np.asarray(evaluator(x))) ** 2

    lev_values, lev_flags = [], []
    for R in R_set:
        value, converged = _refined_integral(energy, -R, R, max(256, int(64 * R)), rel_change, max_points)
        lev_values.append(R ** (-(1.0 - alpha)) * value)
        if not converged:
            lev_flags.append(f"not_converged_R={R}")

    illw_values, illw_flags = [], []
    for lam in lambda_set:
        value, converged = _refined_integral(lambda x: energy(lam + x), -C, C, max(256, int(64 * C)),
                                             rel_change, max_points)
        illw_values.append(abs(lam) ** (-gamma) * value)
        if not converged:
            illw_flags.append(f"not_converged_lambda={lam}")

    lev = CriterionReport("lev", INCONCLUSIVE,
                          inputs={"alpha": alpha, "R": list(map(float, R_set))},
                          constants={"values": lev_values, "proxy": float(min(lev_values))},
                          flags=lev_flags)
    illw = CriterionReport("illw", INCONCLUSIVE,
                           inputs={"gamma": gamma, "C": C, "lambda": list(map(float, lambda_set))},
                           constants={"values": illw_values, "proxy": float(min(illw_values))},
                           flags=illw_flags)
    return lev, illw


def frame_bounds_estimate(measure: AtomicMeasure, Lambda: Sequence[float], rank_tol: float = 1e-10) -> Dict:
    """Extremal eigenvalues of the finite frame operator Σ_λ |⟨f, e_λ⟩_μ|² on L²(μ).

    With g_j = √w_j f_j the frame form is ‖E g‖² for E_{λj} = e^{−2πiλx_j}√w_j.
    """
    lam = np.asarray(Lambda, dtype=float)
    if lam.size > 2000 or measure.size > 2000:
        raise CriterionInputError("frame bound estimate limited to 2000 frequencies and 2000 atoms")
    if lam.size == 0:
        return {"A_est": 0.0, "B_est": 0.0, "flags": ["empty_lambda"]}
    E = np.exp(-2j * np.pi * np.outer(lam, measure.positions)) * np.sqrt(measure.weights)[None, :]
    eigenvalues = eigh(E.conj().T @ E, eigvals_only=True)
    B = float(max(eigenvalues[-1], 0.0))
    A = float(max(eigenvalues[0], 0.0))
    flags = []
    if A <= rank_tol * max(B, 1.0):
        flags.append("rank_deficient")
    return {"A_est": A, "B_est": B, "flags": flags}
