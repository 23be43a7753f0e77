import csv
import json

import pytest

from config import config
from services import convolution_cantor as cc
from services.experiment_runner import (
    ExperimentError, RunReport, array_digest, emit_report, evaluate_criteria, load_report, payload_digest,
    run_experiment,
)
from services.frame_criteria import INCONCLUSIVE, NO_FRAME
from utils.validators import ExperimentConfig


def _lebesgue_payload():
    n = 256
    return {"atoms": [[j / n, 1.0 / n] for j in range(n)], "support_hint": [0.0, 1.0], "tag": "lebesgue"}


@pytest.fixture(scope="module")
def convolution_report():
    return run_experiment(ExperimentConfig(construction="convolution", s=0.5, levels=3, seed=42))


class TestConvolutionRun:
    def test_checks(self, convolution_report):
        assert convolution_report.passed
        assert convolution_report.checks["ahlfors"]["passed"]
        assert convolution_report.checks["ratio_sequence"]["closed_form"]
        assert convolution_report.digest["atom_count"] == 24

    def test_uniformity_criterion(self, convolution_report):
        (criterion,) = convolution_report.criteria
        assert criterion.criterion == "uniformity"
        assert criterion.verdict == INCONCLUSIVE  # three levels never pass the threshold of 10

    def test_rerun_is_byte_identical(self, convolution_report, tmp_path):
        again = run_experiment(ExperimentConfig(construction="convolution", s=0.5, levels=3, seed=42))
        first = emit_report(convolution_report, str(tmp_path / "a"))[0]
        second = emit_report(again, str(tmp_path / "b"))[0]
        assert first.read_bytes() == second.read_bytes()

    def test_different_seed_changes_digest(self, convolution_report):
        other = run_experiment(ExperimentConfig(construction="convolution", s=0.5, levels=3, seed=43))
        assert other.digest["points"] != convolution_report.digest["points"]

    def test_failed_build_raises_with_partial_report(self):
        cfg = ExperimentConfig(construction="convolution", levels=config.CONVOLUTION_MAX_LEVELS + 1, seed=1)
        with pytest.raises(ExperimentError) as info:
            run_experiment(cfg)
        report = info.value.report
        assert report is not None
        assert report.failures[0]["stage"] == "build"
        assert report.failures[0]["error_type"] == "ValueError"

    def test_tolerance_override_is_scoped(self):
        before = config.BAND_SAMPLES
        report = run_experiment(ExperimentConfig(construction="one_line", s=0.5, levels=8, seed=3,
                                                 tolerances={"band_samples": 32}))
        assert report.fourier_profiles["combined"].samples_per_band == 32
        assert config.BAND_SAMPLES == before

    def test_bands_use_integer_lattice(self, convolution_report):
        profile = convolution_report.fourier_profiles["mu"]
        assert profile.sampling == "lattice"
        assert profile.statistic == "mean_square"
        assert [m for m, _ in profile.band_power] == list(range(4, 15))


class TestOtherConstructions:
    def test_cantor(self, golden):
        gold = golden("cantor_j12")
        report = run_experiment(ExperimentConfig(construction="cantor", s=0.5, levels=12, seed=7))
        for name in ("heavy_ball", "sigma_recursion", "increment"):
            assert report.checks[name]["passed"]
        assert len(report.checks["increment"]["per_level"]) == 12
        heavy = report.ball_profiles["heavy"]
        assert heavy.fitted_alpha == pytest.approx(gold["alpha"], abs=0.1)
        assert report.fourier_profiles["mu"].fitted_beta >= gold["beta_min"]
        verdicts = {c.inputs["profile"]: c.verdict for c in report.criteria}
        assert set(verdicts) == {"mu", "tapered"}
        assert verdicts["mu"] == NO_FRAME
        assert "cells" in report.criteria_payload["measure"]

    def test_cantor_increment_override_fails_check(self):
        report = run_experiment(ExperimentConfig(construction="cantor", s=0.5, levels=8, seed=7,
                                                 tolerances={"increment_c": 1e-3}))
        assert not report.checks["increment"]["passed"]
        assert any(f["stage"] == "increment" for f in report.failures)
        assert config.CANTOR_INCREMENT_C == 32.0

    def test_brownian(self):
        report = run_experiment(ExperimentConfig(construction="brownian", s=0.5, levels=10, paths=100,
                                                 xi_max=64.0, seed=5))
        assert report.checks["ball_identity"]["passed"]
        assert report.checks["decay_mc"]["n_paths"] == 100
        assert report.ball_profiles["heavy"].tag == report.fourier_profiles["image"].tag

    def test_kaufman(self):
        report = run_experiment(ExperimentConfig(construction="kaufman", s=1.0, q=[1e3, 1e5], cs=1.0,
                                                 kmax=1 << 14))
        assert report.seed is None
        assert report.checks["positivity"]["passed"]
        assert report.checks["factor_at_zero"]["passed"]
        assert report.digest["coefficients"].startswith("sha256:")
        assert "mu" in report.fourier_profiles

    def test_arc(self):
        report = run_experiment(ExperimentConfig(construction="arc", gram_k=16, rmax=64.0, samples=4, seed=1))
        assert report.checks["gram"]["passed"]
        assert report.checks["gram"]["K"] == 16
        assert "arc" in report.fourier_profiles

    def test_one_line(self):
        report = run_experiment(ExperimentConfig(construction="one_line", s=0.5, levels=8, seed=3))
        assert report.checks["mass"]["passed"]
        assert "unbounded_derivative" in report.digest["flags"]


class TestEmission:
    def test_files(self, convolution_report, tmp_path):
        paths = emit_report(convolution_report, str(tmp_path), formats=("json", "csv"))
        names = {p.name for p in paths}
        assert {"convolution_42.json", "convolution_42.timing.json", "convolution_42.criteria.json",
                "convolution_42_bands_mu.csv"} <= names
        with open(tmp_path / "convolution_42_bands_mu.csv", newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["m", "envelope"]
        assert all(len(row) == 2 for row in rows)

    def test_round_trip(self, convolution_report, tmp_path):
        path = emit_report(convolution_report, str(tmp_path))[0]
        data = json.loads(path.read_text(encoding="utf-8"))
        assert "wall_time" not in data
        assert load_report(str(path)).to_dict() == data

    def test_empty_report(self, tmp_path):
        path = emit_report(RunReport("arc", {}, None), str(tmp_path))[0]
        data = json.loads(path.read_text(encoding="utf-8"))
        assert path.name == "arc_noseed.json"
        assert data["fourier_profiles"] == {} and data["criteria"] == [] and data["failures"] == []

    def test_schema_checked_on_load(self):
        with pytest.raises(ValueError, match="schema"):
            RunReport.from_dict({"schema": "other/9", "construction": "arc"})


class TestCriteriaPayload:
    def test_uniformity_and_frame_bounds(self):
        result = evaluate_criteria({
            "measure": _lebesgue_payload(),
            "ratios": cc.ratio_sequence(12),
            "lambda": list(range(-128, 128)),
            "ball": {"x0": 0.5, "r": 0.01},
        })
        assert result["criteria"][0]["verdict"] == NO_FRAME
        assert result["frame_bounds"]["A_est"] == pytest.approx(1.0, abs=0.05)
        assert result["shi_counting"]["passed"]
        assert result["disclaimer"]

    def test_lambda_needs_measure(self):
        from services.frame_criteria import CriterionInputError

        with pytest.raises(CriterionInputError):
            evaluate_criteria({"lambda": [0.0, 1.0]})

    def test_integral_criteria(self):
        result = evaluate_criteria({
            "measure": _lebesgue_payload(),
            "integral": {"alpha": 0.5, "gamma": 0.5, "C": 1.0, "R": [4.0], "lambda": [2.0, 4.0]},
        })
        assert [c["criterion"] for c in result["criteria"]] == ["lev", "illw"]


def test_digests_are_stable():
    assert array_digest([1.0, 2.0]) == array_digest([1.0, 2.0])
    assert array_digest([1.0, 2.0]) != array_digest([2.0, 1.0])
    assert payload_digest({"b": 1, "a": 2}) == payload_digest({"a": 2, "b": 1})


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(7, 17))
def test_cantor_verdict_across_seeds(seed, golden):
    gold = golden("cantor_j12")
    assert seed in gold["seeds"]
    report = run_experiment(ExperimentConfig(construction="cantor", s=0.5, levels=gold["J"], seed=seed))
    mu = report.fourier_profiles["mu"]
    assert mu.fitted_beta >= gold["beta_min"]
    verdicts = {c.inputs["profile"]: c.verdict for c in report.criteria}
    assert verdicts["mu"] == NO_FRAME


@pytest.mark.slow
def test_convolution_k6_decay(golden):
    gold = golden("convolution_k6")
    report = run_experiment(ExperimentConfig(construction="convolution", s=gold["s"], levels=gold["K"],
                                             seed=gold["seed"]))
    assert report.digest["atom_count"] == gold["atom_count"]
    assert report.checks["ratio_sequence"]["ratios"] == gold["ratios"]
    profile = report.fourier_profiles["mu"]
    lo, hi = gold["beta_range"]
    assert [m for m, _ in profile.band_power] == list(range(gold["bands"][0], gold["bands"][1] + 1))
    assert lo <= profile.fitted_beta <= hi
