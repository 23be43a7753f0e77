"""Experiment runner: dispatch one construction, run its checks and criteria, emit reports.

A run is deterministic given its config. The canonical JSON carries no timing, so two runs
with the same seed give byte-identical files; wall time goes to a sidecar.
"""

import csv
import hashlib
import json
import logging
import math
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pytz
import scipy

from config import config
from services import arc_measure as arc
from services import brownian_images as bi
from services import convolution_cantor as cc
from services import kaufman_diophantine as kd
from services import nonconvolution_cantor as nc
from services.core_measure import (
    AtomicMeasure, BallProfile, FitError, FourierProfile, MeasureError, QuadratureGuardError, StepDensity,
    band_envelope, energy_integral, fit_ball_exponents, fit_decay_exponent, fourier_atomic_many,
    fourier_product_many, fourier_step_many, one_line_combine,
)
from services.frame_criteria import (
    CriterionInputError, CriterionReport, frame_bounds_estimate, heavy_decay_verdict, integral_criteria,
    shi_counting_check, uniformity_verdict,
)
from utils.logging_config import log_error, log_performance, log_stage
from utils.validators import ExperimentConfig, sanitize_filename

logger = logging.getLogger(__name__)

MODULE_ERRORS = (
    ValueError, MeasureError, FitError, QuadratureGuardError,
    cc.SamplingError, cc.EnumerationBudgetError, nc.RetryCapExceeded,
    bi.ResolutionMismatch, bi.BallConditionViolation,
    kd.CalibrationError, kd.TruncationBudgetError, kd.PrimeSetError, kd.ComparisonViolation,
    CriterionInputError, arc.ArcBudgetError,
)

# config attributes a [tolerances] entry may override for the duration of one run
TOLERANCE_OVERRIDES = {
    "convolution_c": "CONVOLUTION_C",
    "kaufman_tail_tol": "KAUFMAN_TAIL_TOL",
    "arc_tol": "ARC_TOL",
    "retry_cap": "CANTOR_RETRY_CAP",
    "band_samples": "BAND_SAMPLES",
    "discard_low_bands": "DISCARD_LOW_BANDS",
    "increment_c": "CANTOR_INCREMENT_C",
    "increment_eps": "CANTOR_INCREMENT_EPS",
}
INTEGER_OVERRIDES = ("CANTOR_RETRY_CAP", "BAND_SAMPLES", "DISCARD_LOW_BANDS")


class ExperimentError(Exception):
    """Construction failed; carries the partial report"""

    def __init__(self, message: str, construction: str, report: Optional["RunReport"] = None):
        super().__init__(f"[{construction}] {message}")
        self.construction = construction
        self.report = report


@dataclass
class RunReport:
    construction: str
    config: Dict
    seed: Optional[int]
    digest: Dict = field(default_factory=dict)
    fourier_profiles: Dict[str, FourierProfile] = field(default_factory=dict)
    ball_profiles: Dict[str, BallProfile] = field(default_factory=dict)
    criteria: List[CriterionReport] = field(default_factory=list)
    checks: Dict[str, Any] = field(default_factory=dict)
    failures: List[Dict] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=dict)
    schema: str = config.REPORT_SCHEMA
    wall_time: float = 0.0
    criteria_payload: Optional[Dict] = None

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        return _jsonable({
            "schema": self.schema,
            "construction": self.construction,
            "config": self.config,
            "seed": self.seed,
            "digest": self.digest,
            "fourier_profiles": {k: v.to_dict() for k, v in self.fourier_profiles.items()},
            "ball_profiles": {k: v.to_dict() for k, v in self.ball_profiles.items()},
            "criteria": [c.to_dict() for c in self.criteria],
            "checks": self.checks,
            "failures": self.failures,
            "versions": self.versions,
        })

    @classmethod
    def from_dict(cls, data: Dict) -> "RunReport":
        if data.get("schema") != config.REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(
            construction=data["construction"],
            config=data.get("config", {}),
            seed=data.get("seed"),
            digest=data.get("digest", {}),
            fourier_profiles={k: FourierProfile.from_dict(v) for k, v in data.get("fourier_profiles", {}).items()},
            ball_profiles={k: BallProfile.from_dict(v) for k, v in data.get("ball_profiles", {}).items()},
            criteria=[CriterionReport(**c) for c in data.get("criteria", [])],
            checks=data.get("checks", {}),
            failures=data.get("failures", []),
            versions=data.get("versions", {}),
        )


# ─────────────────────────────
# Helpers
# ─────────────────────────────
def _jsonable(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def array_digest(*arrays) -> str:
    """sha256 over the float64 bytes of the given arrays."""
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return "sha256:" + h.hexdigest()


def payload_digest(payload: Dict) -> str:
    canonical = json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _versions() -> Dict[str, str]:
    return {"salem-lab": config.VERSION, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@contextmanager
def _tolerance_overrides(tolerances: Dict[str, float]):
    saved = {}
    try:
        for key, value in tolerances.items():
            name = TOLERANCE_OVERRIDES[key]
            saved[name] = getattr(config, name)
            setattr(config, name, int(value) if name in INTEGER_OVERRIDES else float(value))
        yield
    finally:
        for name, value in saved.items():
            setattr(config, name, value)


class _Stages:
    """Runs named stages in order, recording failed checks and module errors."""

    def __init__(self, report: RunReport):
        self.report = report

    def run(self, name: str, fn: Callable[[], Any]) -> Any:
        started = time.time()
        try:
            result = fn()
        except MODULE_ERRORS as e:
            log_error(e, {"construction": self.report.construction, "stage": name, "seed": self.report.seed})
            self.report.failures.append({
                "stage": name, "kind": "error", "error_type": type(e).__name__, "message": str(e),
                "witness": _jsonable(getattr(e, "witness", None)),
            })
            return None
        log_stage(self.report.construction, name, time.time() - started, seed=self.report.seed)
        return result

    def check(self, name: str, fn: Callable[[], Dict]) -> Optional[Dict]:
        result = self.run(name, fn)
        if result is None:
            return None
        self.report.checks[name] = result
        if isinstance(result, dict) and result.get("passed") is False:
            self.report.failures.append({"stage": name, "kind": "check", "detail": _jsonable(result)})
            logger.warning(f"{self.report.construction}: check {name} failed")
        return result


def _valid_band_refit(profile: FourierProfile, floor: float, discard: int = 0):
    """Refit on bands whose envelope exceeds 10× the truncation floor."""
    kept = [(m, e) for m, e in profile.bands if e > 10.0 * floor]
    if len(kept) < len(profile.bands):
        profile.flags.append("tail_limited_bands")
        profile.bands = kept
        valid = {m for m, _ in kept}
        profile.band_power = [(m, p) for m, p in profile.band_power if m in valid]
    profile.fitted_beta = profile.stderr = profile.slack_epsilon = profile.residual = None
    profile.fit_bands = []
    try:
        fit_decay_exponent(profile, discard)
    except FitError:
        profile.flags.append("degenerate_fit")


# ─────────────────────────────
# Constructions
# ─────────────────────────────
def _run_convolution(cfg: ExperimentConfig, report: RunReport, stages: _Stages):
    K = cfg.levels or 6
    b = stages.run("build", lambda: cc.build(cfg.s, K, t=cfg.t_vector, seed=cfg.seed))
    if b is None:
        raise ExperimentError("build failed", "convolution", report)
    report.digest = {
        "atom_count": b.measure.atom_count,
        "levels": [lv.to_dict() for lv in b.levels],
        "points": array_digest(*[lv.points for lv in b.levels]),
        "scales": array_digest([lv.l for lv in b.levels]),
    }
    stages.check("ahlfors", lambda: cc.ahlfors_check(b).to_dict())
    ratios = cc.ratio_sequence(K)
    report.checks["ratio_sequence"] = {"ratios": ratios,
                                       "closed_form": all(r == (N + 1) * (N + 2) // 2
                                                          for N, r in enumerate(cc.ratio_sequence_exact(K), 1))}
    profile = stages.run("bands", lambda: band_envelope(
        lambda xi: fourier_product_many(b.measure, xi), 4, 14, sampling="lattice",
        statistic="mean_square", tag="convolution"))
    if profile is not None:
        report.fourier_profiles["mu"] = profile
    verdict = stages.run("uniformity", lambda: uniformity_verdict(ratios))
    if verdict is not None:
        report.criteria.append(verdict)
    report.criteria_payload = {"ratios": ratios,
                               "fourier_profile": profile.to_dict() if profile else None}


def _run_cantor(cfg: ExperimentConfig, report: RunReport, stages: _Stages):
    J = cfg.levels or 12
    b = stages.run("build", lambda: nc.build(cfg.s, J, cfg.seed, config.CANTOR_RETRY_CAP))
    if b is None:
        raise ExperimentError("build failed", "cantor", report)
    final = b.final
    density = final.density()
    report.digest = {
        "t": list(final.t),
        "node_counts": [int(st.nodes.size) for st in b.states],
        "sigma_sq": [st.sigma_sq for st in b.states],
        "attempts": [st.attempts for st in b.states],
        "nodes": array_digest(final.nodes),
        "weights": array_digest(final.weights),
        "flags": b.flags,
    }
    stages.check("heavy_ball", lambda: nc.heavy_ball_check(b))
    stages.check("sigma_recursion", lambda: nc.sigma_recursion_check(b.states))
    stages.check("increment", lambda: nc.increment_trajectory_check(b.states))
    report.checks["energy"] = stages.run(
        "energy", lambda: {"t": cfg.s / 2.0, "value": energy_integral(density.as_atoms(), cfg.s / 2.0)})

    # bands stop below the cell scale 2^J, where the step prefactor takes over
    top = max(J - 1, 7)
    mu = stages.run("bands", lambda: band_envelope(
        lambda xi: fourier_step_many(density, xi), 4, top, sampling="lattice",
        statistic="mean_square", discard_low_bands=0, tag="cantor"))
    tapered = stages.run("taper_bands", lambda: band_envelope(
        lambda xi: nc.tapered_fourier(final, xi), 4, top, sampling="lattice",
        statistic="mean_square", discard_low_bands=0, tag="cantor"))
    radii = 2.0 ** -np.arange(max(1, J - 9), J + 1)
    ball = stages.run("balls", lambda: fit_ball_exponents(
        density, [final.heavy_position], radii, side="lower", tag="cantor"))
    if mu is not None:
        report.fourier_profiles["mu"] = mu
    if tapered is not None:
        report.fourier_profiles["tapered"] = tapered
    if ball is not None:
        report.ball_profiles["heavy"] = ball

    for name, profile in (("mu", mu), ("tapered", tapered)):
        if ball is None or profile is None:
            continue
        verdict = stages.run(f"heavy_decay_{name}", lambda: heavy_decay_verdict(ball, profile))
        if verdict is not None:
            verdict.inputs["profile"] = name
            report.criteria.append(verdict)
    report.criteria_payload = {
        "measure": density.to_dict(),
        "fourier_profile": mu.to_dict() if mu else None,
        "ball_profile": ball.to_dict() if ball else None,
    }


def _run_brownian(cfg: ExperimentConfig, report: RunReport, stages: _Stages):
    J = cfg.levels or config.BROWNIAN_LEVELS
    top = int(math.floor(math.log2(cfg.xi_max))) if cfg.xi_max else 8
    xi = 2.0 ** np.arange(2, top + 1)
    base = stages.run("build", lambda: bi.base_measure(cfg.s, J))
    if base is None:
        raise ExperimentError("build failed", "brownian", report)
    n_grid = 1 << (J + 1)
    path = stages.run("path", lambda: bi.simulate_path(n_grid, cfg.seed, at=bi.required_indices(base, n_grid)))
    image = bi.pushforward(base, path) if path is not None else None
    report.digest = {
        "base": base.to_dict(),
        "base_weights": array_digest(base.density.weights),
        "path": array_digest(path.values) if path is not None else None,
    }
    stages.check("ball_identity", lambda: bi.ball_identity_check(base))
    report.checks["scan"] = stages.run("scan", lambda: bi.scan_check(base))

    decay = stages.run("decay_mc", lambda: bi.decay_mc(cfg.s, cfg.seed, J, xi, cfg.paths))
    if decay is not None:
        report.checks["decay_mc"] = {
            **decay.to_dict(),
            "passed": bool(all(decay.within_tolerance)) and abs(decay.slope + 2.0 * cfg.s) <= 0.3,
        }
        if not report.checks["decay_mc"]["passed"]:
            report.failures.append({"stage": "decay_mc", "kind": "check",
                                    "detail": {"slope": decay.slope, "within_tolerance": decay.within_tolerance}})
    if image is None:
        return
    profile = stages.run("bands", lambda: band_envelope(
        lambda x: fourier_atomic_many(image, x), 2, top, seed=cfg.seed, discard_low_bands=0,
        tag="brownian_image"))
    ball = stages.run("balls", lambda: bi.heavy_ball_profile(base, path))
    if profile is not None:
        report.fourier_profiles["image"] = profile
    if ball is not None:
        ball.tag = "brownian_image"
        report.ball_profiles["heavy"] = ball
        if ball.fitted_alpha is not None:
            bound = cfg.s / (2.0 * bi.HOLDER_ALPHA) + 0.2
            stages.check("heavy_ball_trend", lambda: {"alpha": ball.fitted_alpha, "bound": bound,
                                                      "passed": ball.fitted_alpha <= bound})
    if ball is not None and profile is not None:
        verdict = stages.run("heavy_decay", lambda: heavy_decay_verdict(ball, profile))
        if verdict is not None:
            report.criteria.append(verdict)
    report.criteria_payload = {
        "measure": image.to_dict(),
        "fourier_profile": profile.to_dict() if profile else None,
        "ball_profile": ball.to_dict() if ball else None,
    }


def _run_kaufman(cfg: ExperimentConfig, report: RunReport, stages: _Stages):
    n = cfg.n
    K_out = cfg.kmax or (1 << 19)
    params = stages.run("params", lambda: kd.make_params(cfg.s, cfg.q, cfg.cs))
    phi = stages.run("phi", kd.build_phi)
    if params is None or phi is None:
        raise ExperimentError("parameter calibration failed", "kaufman", report)
    sets = stages.run("prime_sets", lambda: kd.prime_sets(params))
    product = stages.run("product", lambda: kd.product_coeffs(n, "mu", params, phi, K_out=K_out))
    if sets is None or product is None:
        raise ExperimentError("coefficient build failed", "kaufman", report)
    coeffs = product.coefficients()
    report.digest = {
        "params": params.to_dict(),
        "prime_set_sizes": {"mu": [int(s.size) for s in sets[0]], "nu": [int(s.size) for s in sets[1]]},
        "coefficients": array_digest(coeffs.values),
        "tail_bound": product.tail_bound,
    }
    positive = coeffs.values > 0
    stages.check("positivity", lambda: {
        "K_out": coeffs.K_max, "min_value": float(coeffs.values.min()),
        "positive_range": int(coeffs.K_max if positive.all() else np.min(np.abs(coeffs.ks[~positive])) - 1),
        "passed": bool(positive.all())})
    stages.check("factor_at_zero", lambda: {
        "values": [kd.coeff_F(i, "mu", 0, params, phi) for i in range(1, n + 1)],
        "passed": all(abs(kd.coeff_F(i, "mu", 0, params, phi) - 1.0) <= 1e-12 for i in range(1, n + 1))})
    report.checks["stability"] = stages.run("stability", lambda: kd.stability_check("one", 1, params, phi))
    if n == 1:
        report.checks["frostman"] = stages.run("frostman", lambda: kd.frostman_nu(1, params, phi))
    comparison = stages.run("comparison", lambda: kd.comparison_checks(n, params, phi, seed=cfg.seed or 0))
    if comparison is not None:
        report.checks["comparison"] = comparison
    ks = np.arange(2, 2002)
    report.checks["divisor_bound"] = stages.run("divisor_bound", lambda: kd.divisor_bound_check(params, 1, ks))

    top = min(18, int(math.log2(K_out)) - 1)
    profile = stages.run("bands", lambda: band_envelope(
        product.transform, 4, top, seed=cfg.seed if cfg.seed is not None else config.MASTER_SEED,
        discard_low_bands=0, tag="kaufman"))
    if profile is not None:
        _valid_band_refit(profile, product.tail_bound)
        report.fourier_profiles["mu"] = profile
    report.criteria_payload = {"fourier_profile": profile.to_dict() if profile else None}


def _run_arc(cfg: ExperimentConfig, report: RunReport, stages: _Stages):
    K = cfg.gram_k or 128
    R_max = cfg.rmax or 1024.0
    samples = cfg.samples or 32

    def gram_check():
        gram = arc.gram_onb(K)
        gram["passed"] = gram["max_off_diagonal"] <= 1e-10
        return gram

    stages.check("gram", gram_check)
    scan = stages.run("decay_scan", lambda: arc.decay_scan(R_max, samples, cfg.seed))
    if scan is not None:
        report.fourier_profiles["arc"] = scan.profile
        stages.check("sup_stable", lambda: {"sup_constant": scan.sup_constant, "history": scan.sup_history,
                                            "direction_max": scan.direction_max, "passed": scan.stabilized})
    report.digest = {"gram_k": K, "R_max": R_max, "samples": samples}


def _run_one_line(cfg: ExperimentConfig, report: RunReport, stages: _Stages):
    J = cfg.levels or 12
    b = stages.run("build", lambda: nc.build(cfg.s, J, cfg.seed, config.CANTOR_RETRY_CAP))
    if b is None:
        raise ExperimentError("build failed", "one_line", report)
    nu = b.final.density().as_atoms()
    x0 = cfg.x0 if cfg.x0 is not None else b.final.heavy_position + 0.5 * 2.0 ** -J
    combined = stages.run("combine", lambda: one_line_combine(nu, x0))
    if combined is None:
        raise ExperimentError("combination failed", "one_line", report)
    report.digest = {"x0": x0, "atoms": combined.size, "flags": list(combined.flags),
                     "positions": array_digest(combined.positions), "weights": array_digest(combined.weights)}
    stages.check("mass", lambda: {"total_mass": combined.total_mass,
                                  "passed": combined.total_mass >= nu.total_mass - 1e-12})
    profile = stages.run("bands", lambda: band_envelope(
        lambda xi: fourier_atomic_many(combined, xi), 4, 11, seed=cfg.seed, discard_low_bands=0,
        tag="one_line"))
    if profile is not None:
        report.fourier_profiles["combined"] = profile
    report.criteria_payload = {"measure": combined.to_dict(),
                               "fourier_profile": profile.to_dict() if profile else None}


RUNNERS = {
    "convolution": _run_convolution,
    "cantor": _run_cantor,
    "brownian": _run_brownian,
    "kaufman": _run_kaufman,
    "arc": _run_arc,
    "one_line": _run_one_line,
}


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Build the configured construction, then run checks, decay and ball fits, and verdicts."""
    report = RunReport(cfg.construction, cfg.echo(), cfg.seed, versions=_versions())
    started = time.time()
    logger.info(f"Running {cfg.construction} (s={cfg.s}, seed={cfg.seed})",
                extra={"construction": cfg.construction, "seed": cfg.seed})
    try:
        with _tolerance_overrides(cfg.tolerances):
            RUNNERS[cfg.construction](cfg, report, _Stages(report))
    except ExperimentError:
        report.wall_time = time.time() - started
        raise
    except Exception as e:
        report.wall_time = time.time() - started
        log_error(e, {"construction": cfg.construction, "seed": cfg.seed})
        raise ExperimentError(f"{type(e).__name__}: {e}", cfg.construction, report) from e
    report.wall_time = time.time() - started
    log_performance("run_experiment", report.wall_time, construction=cfg.construction, seed=cfg.seed)
    return report


# ─────────────────────────────
# Criteria on serialized inputs
# ─────────────────────────────
def _measure_from(data: Dict):
    if "cells" in data:
        return StepDensity.from_dict(data)
    if "atoms" in data:
        return AtomicMeasure.from_dict(data)
    raise CriterionInputError("measure needs either 'cells' or 'atoms'")


def evaluate_criteria(payload: Dict) -> Dict:
    """Criterion reports for whatever inputs the payload carries.

    Recognized keys: measure, fourier_profile, ball_profile, ratios, lambda,
    ball {x0, r, B_est}, integral {alpha, gamma, C, R, lambda}.
    """
    out: Dict[str, Any] = {"criteria": [], "disclaimer": None}
    measure = _measure_from(payload["measure"]) if payload.get("measure") else None
    atomic = measure.as_atoms() if isinstance(measure, StepDensity) else measure

    if payload.get("ratios"):
        out["criteria"].append(uniformity_verdict(payload["ratios"]).to_dict())
    if payload.get("ball_profile") and payload.get("fourier_profile"):
        ball = BallProfile.from_dict(payload["ball_profile"])
        fourier = FourierProfile.from_dict(payload["fourier_profile"])
        out["criteria"].append(heavy_decay_verdict(ball, fourier).to_dict())

    if payload.get("lambda") is not None:
        if atomic is None:
            raise CriterionInputError("frame bounds need a measure")
        bounds = frame_bounds_estimate(atomic, payload["lambda"])
        out["frame_bounds"] = bounds
        if payload.get("ball"):
            ball_args = payload["ball"]
            out["shi_counting"] = shi_counting_check(
                atomic, ball_args["x0"], ball_args["r"], payload["lambda"],
                ball_args.get("B_est", bounds["B_est"]))

    if payload.get("integral"):
        if measure is None:
            raise CriterionInputError("integral criteria need a measure")
        args = payload["integral"]
        if isinstance(measure, StepDensity):
            evaluator = lambda xi: fourier_step_many(measure, xi)
        else:
            evaluator = lambda xi: fourier_atomic_many(measure, xi)
        lev, illw = integral_criteria(evaluator, args["alpha"], args["gamma"], args["C"], args["R"],
                                      args.get("lambda"))
        out["criteria"].extend([lev.to_dict(), illw.to_dict()])

    if out["criteria"]:
        out["disclaimer"] = out["criteria"][0]["disclaimer"]
    return _jsonable(out)


# ─────────────────────────────
# Emission
# ─────────────────────────────
def report_stem(report: RunReport) -> str:
    return sanitize_filename(f"{report.construction}_{report.seed if report.seed is not None else 'noseed'}")


def _write_csv(path: Path, rows: Iterable[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(rows)


def emit_report(report: RunReport, out_dir: Optional[str] = None, formats: Sequence[str] = ("json",),
                stem: Optional[str] = None) -> List[Path]:
    """Write the canonical JSON plus optional CSV tables; IO errors propagate unchanged."""
    directory = Path(out_dir or config.OUTPUT_DIR)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or report_stem(report)
    written = []

    if "json" in formats:
        path = directory / f"{stem}.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                        encoding="utf-8")
        written.append(path)
        timing = directory / f"{stem}.timing.json"
        finished = datetime.now(pytz.timezone(config.TIMEZONE))
        timing.write_text(json.dumps({"wall_time": report.wall_time, "finished": finished.isoformat()}) + "\n",
                          encoding="utf-8")
        written.append(timing)
        if report.criteria_payload:
            payload = directory / f"{stem}.criteria.json"
            payload.write_text(json.dumps(_jsonable(report.criteria_payload), sort_keys=True) + "\n",
                               encoding="utf-8")
            written.append(payload)

    if "csv" in formats:
        for name, profile in report.fourier_profiles.items():
            path = directory / f"{stem}_bands_{name}.csv"
            _write_csv(path, profile.csv_rows())
            written.append(path)
        for name, profile in report.ball_profiles.items():
            path = directory / f"{stem}_balls_{name}.csv"
            _write_csv(path, profile.csv_rows())
            written.append(path)

    logger.info(f"Report written: {[str(p) for p in written]}")
    return written


def load_report(path: str) -> RunReport:
    with open(path, "r", encoding="utf-8") as handle:
        return RunReport.from_dict(json.load(handle))
