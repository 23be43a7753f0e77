import numpy as np
import pytest

from services import convolution_cantor as cc
from services import frame_criteria as fc
from services.core_measure import AtomicMeasure, BallProfile, FourierProfile, StepDensity, fit_ball_exponents


def _ball(alpha, stderr=0.01, tag="m", side="lower"):
    return BallProfile(samples=[], fitted_alpha=alpha, side=side, stderr=stderr, tag=tag)


def _fourier(beta, stderr=0.02, tag="m"):
    return FourierProfile(bands=[], fitted_beta=beta, stderr=stderr, tag=tag)


@pytest.fixture
def lebesgue_atoms():
    n = 256
    return AtomicMeasure.from_atoms(np.arange(n) / n, np.full(n, 1.0 / n))


class TestUniformity:
    def test_ratio_sequence_indicates_no_frame(self):
        report = fc.uniformity_verdict(cc.ratio_sequence(20))
        assert report.verdict == fc.NO_FRAME
        assert report.constants["closed_form"] == "(N+1)(N+2)/2"
        assert report.disclaimer == fc.DISCLAIMER

    def test_bounded_ratios_are_inconclusive(self):
        report = fc.uniformity_verdict([1.0, 1.5, 1.75, 1.875])
        assert report.verdict == fc.INCONCLUSIVE
        assert "closed_form" not in report.constants

    def test_empty(self):
        with pytest.raises(fc.CriterionInputError):
            fc.uniformity_verdict([])


class TestHeavyDecay:
    def test_separated_exponents(self):
        report = fc.heavy_decay_verdict(_ball(0.3), _fourier(0.5))
        assert report.verdict == fc.NO_FRAME
        assert report.constants["gap"] == pytest.approx(0.17)

    def test_overlapping_errors_are_inconclusive(self):
        report = fc.heavy_decay_verdict(_ball(0.45, stderr=0.05), _fourier(0.5, stderr=0.05))
        assert report.verdict == fc.INCONCLUSIVE

    def test_suspicious_ball_exponent(self):
        report = fc.heavy_decay_verdict(_ball(0.1), _fourier(0.5))
        assert report.verdict == fc.INCONCLUSIVE
        assert "suspicious_ball_exponent" in report.flags

    def test_tag_mismatch(self):
        with pytest.raises(fc.CriterionInputError, match="different measures"):
            fc.heavy_decay_verdict(_ball(0.3, tag="a"), _fourier(0.5, tag="b"))

    def test_upper_side_rejected(self):
        with pytest.raises(fc.CriterionInputError):
            fc.heavy_decay_verdict(_ball(0.3, side="upper"), _fourier(0.5))

    def test_missing_fit(self):
        with pytest.raises(fc.CriterionInputError):
            fc.heavy_decay_verdict(_ball(None), _fourier(0.5))

    def test_rescaling_leaves_verdict_unchanged(self):
        density = StepDensity.from_cells(4, [0, 1, 8, 9], [0.4, 0.1, 0.25, 0.25])
        atoms = density.as_atoms()
        radii = 2.0 ** -np.arange(1, 6)
        a = fit_ball_exponents(atoms, [0.03125], radii, tag="m")
        b = fit_ball_exponents(atoms.scaled(7.0), [0.03125], radii, tag="m")
        assert a.fitted_alpha == pytest.approx(b.fitted_alpha, abs=1e-12)
        fourier = _fourier(1.5)
        assert fc.heavy_decay_verdict(a, fourier).verdict == fc.heavy_decay_verdict(b, fourier).verdict


class TestFrameBounds:
    def test_parseval_discretization(self, lebesgue_atoms):
        bounds = fc.frame_bounds_estimate(lebesgue_atoms, np.arange(-128, 128))
        assert bounds["A_est"] == pytest.approx(1.0, abs=0.05)
        assert bounds["B_est"] == pytest.approx(1.0, abs=0.05)
        assert bounds["flags"] == []

    def test_duplicate_frequencies_double_bounds(self, lebesgue_atoms):
        once = fc.frame_bounds_estimate(lebesgue_atoms, np.arange(-128, 128))
        twice = fc.frame_bounds_estimate(lebesgue_atoms, np.concatenate((np.arange(-128, 128),) * 2))
        assert twice["A_est"] == pytest.approx(2.0 * once["A_est"], rel=1e-9)
        assert twice["B_est"] == pytest.approx(2.0 * once["B_est"], rel=1e-9)

    def test_empty_lambda(self, lebesgue_atoms):
        bounds = fc.frame_bounds_estimate(lebesgue_atoms, [])
        assert (bounds["A_est"], bounds["B_est"]) == (0.0, 0.0)
        assert "empty_lambda" in bounds["flags"]

    def test_too_few_frequencies_is_rank_deficient(self, lebesgue_atoms):
        bounds = fc.frame_bounds_estimate(lebesgue_atoms, np.arange(0, 10))
        assert "rank_deficient" in bounds["flags"]

    def test_size_limit(self, lebesgue_atoms):
        with pytest.raises(fc.CriterionInputError):
            fc.frame_bounds_estimate(lebesgue_atoms, np.arange(2001))


class TestCounting:
    def test_cosine_bound_holds(self, rng):
        measure = AtomicMeasure.from_atoms(rng.random(200), rng.random(200))
        for x0, r in ((0.5, 0.1), (0.2, 0.05), (0.9, 0.05)):
            report = fc.shi_counting_check(measure, x0, r, np.arange(-50, 51), B_est=1.0)
            assert report["passed"]
            assert report["min_ratio"] >= 0.5

    def test_count_against_ceiling(self, lebesgue_atoms):
        bounds = fc.frame_bounds_estimate(lebesgue_atoms, np.arange(-128, 128))
        report = fc.shi_counting_check(lebesgue_atoms, 0.5, 0.01, np.arange(-128, 128), bounds["B_est"])
        assert report["count"] == 21
        assert report["count_consistent"]

    def test_empty_ball(self):
        measure = AtomicMeasure.from_atoms([0.0, 1.0], [0.5, 0.5])
        report = fc.shi_counting_check(measure, 0.5, 0.1, [0.0], 1.0)
        assert report["passed"]
        assert "empty_ball" in report["flags"]


def test_integral_criteria_report_only():
    lev, illw = fc.integral_criteria(lambda xi: np.sinc(xi), alpha=0.5, gamma=0.5, C=1.0,
                                     R_set=[4.0, 16.0], lambda_set=[2.0, 8.0])
    assert lev.verdict == fc.INCONCLUSIVE and illw.verdict == fc.INCONCLUSIVE
    assert lev.constants["proxy"] == min(lev.constants["values"])
    assert np.all(np.isfinite(illw.constants["values"]))
    assert lev.flags == [] and illw.flags == []


def test_integral_criteria_rejects_bad_ranges():
    with pytest.raises(fc.CriterionInputError):
        fc.integral_criteria(np.sinc, 0.5, 0.5, C=0.0, R_set=[1.0])
