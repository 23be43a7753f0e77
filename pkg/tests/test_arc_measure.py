import math

import pytest

from config import config
from services import arc_measure as arc


class TestArcFourier:
    def test_origin_is_exact(self):
        evaluation = arc.arc_fourier(0.0, 0.0)
        assert evaluation.value == 1.0
        assert evaluation.error_bound == 0.0

    def test_horizontal_integers_vanish(self):
        for k in range(1, 6):
            assert abs(arc.arc_fourier(float(k), 0.0, tol=1e-12).value) < 1e-10

    def test_matches_substitution(self):
        value = arc.arc_fourier(0.0, 100.0).value
        assert abs(value - arc.substitution_oracle(0.0, 100.0)) < 1e-8

    def test_matches_substitution_off_axis(self):
        value = arc.arc_fourier(37.5, -61.25).value
        assert abs(value - arc.substitution_oracle(37.5, -61.25)) < 1e-8

    def test_conjugate_symmetry(self):
        a = arc.arc_fourier(3.3, -7.1).value
        b = arc.arc_fourier(-3.3, 7.1).value
        assert a == pytest.approx(b.conjugate(), abs=1e-10)

    def test_bounded_by_mass(self):
        for xi in ((0.5, 0.5), (12.0, 3.0), (-250.0, 40.0)):
            assert abs(arc.arc_fourier(*xi).value) <= 1.0 + 1e-12

    def test_stationary_phase_scale(self, golden):
        # stationary point on the vertical axis: |σ̂(0, ρ)| ≈ ρ^{−1/2}
        rho = 2000.0
        limit = golden("arc")["stationary_phase_limit"]
        assert math.sqrt(rho) * abs(arc.arc_fourier(0.0, rho).value) == pytest.approx(limit, rel=0.05)

    def test_tolerance_floor(self):
        with pytest.raises(ValueError):
            arc.arc_fourier(1.0, 1.0, tol=1e-13)

    def test_frequency_budget(self):
        with pytest.raises(arc.ArcBudgetError):
            arc.arc_fourier(config.ARC_MAX_FREQUENCY * 2.0, 0.0)

    def test_panels_follow_oscillation(self):
        assert arc.arc_fourier(0.0, 500.0).panels >= math.ceil(500.0 / math.sqrt(3.0))
        assert arc.arc_fourier(0.0, 5.0).panels >= 4


class TestGram:
    def test_orthonormal(self):
        gram = arc.gram_onb(128)
        assert gram["max_off_diagonal"] <= 1e-10
        assert gram["diagonal"] == pytest.approx(1.0)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            arc.gram_onb(513)


class TestDecayScan:
    def test_scan(self):
        scan = arc.decay_scan(256.0, samples=8, seed=1)
        assert len(scan.profile.bands) == 8
        assert scan.profile.tag == "arc"
        assert len(scan.direction_max) == 16
        assert all(b >= a for a, b in zip(scan.sup_history, scan.sup_history[1:]))
        assert scan.sup_constant == scan.sup_history[-1]

    def test_reproducible(self):
        a = arc.decay_scan(64.0, samples=4, seed=5)
        b = arc.decay_scan(64.0, samples=4, seed=5)
        assert a.profile.bands == b.profile.bands

    def test_radius_cap(self):
        with pytest.raises(arc.ArcBudgetError):
            arc.decay_scan(2e5, samples=1, seed=1)

    def test_sup_constant_against_golden(self, golden):
        gold = golden("arc")
        scan = arc.decay_scan(256.0, samples=8, seed=1)
        recorded = gold.pilot("sup_constant_R256", scan.sup_constant)
        assert scan.sup_constant == pytest.approx(recorded, rel=1e-9)
        assert scan.sup_constant <= gold["sup_ceiling"]
        other = arc.decay_scan(256.0, samples=8, seed=2)
        assert other.sup_constant <= gold["sup_ceiling"] * gold["rerun_slack"]
