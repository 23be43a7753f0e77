import math

import numpy as np
import pytest

from config import config
from services import nonconvolution_cantor as nc
from services.core_measure import fourier_step_many, quadrature_oracle
from utils.rng import make_rng


def test_t_sequence():
    assert nc.t_sequence(0.5, 6) == (2, 1, 2, 1, 2, 1)
    assert nc.t_sequence(1.0, 4) == (2, 2, 2, 2)


def test_t_sequence_tracks_dimension():
    t = nc.t_sequence(0.3, 200)
    doublings = sum(tj == 2 for tj in t)
    assert abs(doublings - 0.3 * 200) <= 1


def test_threshold_rejects_zero_variance():
    with pytest.raises(ValueError):
        nc.bernstein_threshold(0.0, 3)


class TestBuild:
    def test_node_counts_and_mass(self, cantor_build):
        for state in cantor_build.states:
            assert state.nodes.size == 2 ** state.doublings
            assert math.fsum(state.weights) == pytest.approx(1.0, abs=1e-12)
            assert np.all(np.diff(state.nodes) > 0)

    def test_heavy_chain_mass(self, cantor_build):
        for state in cantor_build.states[1:]:
            assert nc.heavy_mass(state) ** 2 * 2 ** state.doublings == pytest.approx(1.0, abs=1e-10)
            assert nc.heavy_mass(state) == pytest.approx(nc.heavy_mass_exact(state), abs=1e-12)

    def test_heavy_chain_is_nested(self, cantor_build):
        chain = nc.heavy_chain(cantor_build)
        for (j, a, _), (_, b, _) in zip(chain[1:], chain[2:]):
            assert a <= b < a + 2.0 ** -j

    def test_reproducible(self, cantor_build):
        again = nc.build(0.5, 10, seed=7)
        assert np.array_equal(again.final.nodes, cantor_build.final.nodes)
        assert np.array_equal(again.final.weights, cantor_build.final.weights)

    def test_seed_required(self):
        with pytest.raises(ValueError, match="seed"):
            nc.build(0.5, 4, seed=None)

    def test_golden_structure(self, cantor_build_j12, golden):
        gold = golden("cantor_j12")
        states = cantor_build_j12.states
        assert list(cantor_build_j12.final.t) == gold["t"]
        assert [int(st.nodes.size) for st in states] == gold["node_counts"]
        for state, exponent in zip(states, gold["heavy_mass_exponents"]):
            assert nc.heavy_mass(state) == pytest.approx(2.0 ** (-exponent / 2.0), abs=1e-12)
        assert gold["sigma_sq_1"] == "2 - sqrt(2)"
        assert states[1].sigma_sq == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-12)


class TestChecks:
    def test_heavy_ball(self, cantor_build):
        assert nc.heavy_ball_check(cantor_build)["passed"]

    def test_sigma_recursion(self, cantor_build):
        report = nc.sigma_recursion_check(cantor_build.states)
        assert report["passed"]
        assert report["max_recursion_error"] < 1e-12
        assert 1 in report["sharp_bound_levels_failed"]

    def test_doubling_increment_bound(self, cantor_build):
        states = cantor_build.states
        j = next(i for i, st in enumerate(states[1:], start=1) if st.t[-1] == 2 and i > 1)
        report = nc.increment_bound_check(states[j - 1], states[j])
        assert report["doubling_bound_holds"]
        assert report["difference_at_zero"] < 1e-12

    def test_consecutive_states_required(self, cantor_build):
        with pytest.raises(ValueError):
            nc.increment_bound_check(cantor_build.states[1], cantor_build.states[3])

    def test_increment_constant_from_config(self, cantor_build, monkeypatch):
        monkeypatch.setattr(config, "CANTOR_INCREMENT_C", 1e-3)
        report = nc.increment_bound_check(cantor_build.states[1], cantor_build.states[2])
        assert report["C"] == 1e-3
        assert not report["passed"]

    def test_increment_trajectory_holds(self, cantor_build_j12, golden):
        gold = golden("cantor_j12")
        assert config.CANTOR_INCREMENT_C == gold["increment_C"]
        report = nc.increment_trajectory_check(cantor_build_j12.states)
        assert report["passed"], report["failed_levels"]
        assert [entry["j"] for entry in report["per_level"]] == list(range(12))
        recorded = gold.pilot("max_increment_ratio_seed_7", report["max_ratio"])
        assert report["max_ratio"] == pytest.approx(recorded, rel=1e-9)

    def test_increment_trajectory_tiny_constant_fails(self, cantor_build):
        report = nc.increment_trajectory_check(cantor_build.states, C=1e-3)
        assert not report["passed"]
        assert report["witness_level"] == report["failed_levels"][0]
        assert report["per_level"][report["witness_level"]]["passed"] is False

    def test_increment_trajectory_negative_slack_fails(self, cantor_build):
        report = nc.increment_trajectory_check(cantor_build.states, eps=-50.0)
        assert not report["passed"]
        assert report["eps"] == -50.0
        assert report["failed_levels"][0] >= 1

    def test_increment_trajectory_needs_two_levels(self, cantor_build):
        with pytest.raises(ValueError):
            nc.increment_trajectory_check(cantor_build.states[:1])

    def test_thinning_acceptance(self, cantor_build):
        state = next(st for st in cantor_build.states[2:]
                     if len(cantor_build.states) > st.j + 1 and cantor_build.states[st.j + 1].t[-1] == 1)
        rate = nc.acceptance_probability(state, 200, make_rng(1, "acceptance"))
        assert rate >= 0.4


class TestRetryCap:
    def test_raise_policy(self, monkeypatch):
        monkeypatch.setattr(nc, "bernstein_threshold", lambda sigma_sq, j: 0.0)
        with pytest.raises(nc.RetryCapExceeded):
            nc.build(0.5, 4, seed=1, retry_cap=3, on_cap="raise")

    def test_flag_policy_keeps_best(self, monkeypatch):
        monkeypatch.setattr(nc, "bernstein_threshold", lambda sigma_sq, j: 0.0)
        b = nc.build(0.5, 4, seed=1, retry_cap=3, on_cap="flag")
        assert "retry_cap_level_2" in b.flags
        assert b.states[2].attempts == 3
        assert math.fsum(b.final.weights) == pytest.approx(1.0)


def test_transform_matches_quadrature(cantor_build):
    state = cantor_build.states[4]
    density = state.density()
    ks = np.arange(-64, 65)
    closed = fourier_step_many(density, ks)
    oracle = np.array([quadrature_oracle(density.density, 0.0, 1.0, float(k), 1 << 19) for k in ks])
    assert np.abs(closed - oracle).max() < 1e-7


class TestTaper:
    def test_delta(self):
        assert nc.taper_delta((2, 1, 2, 1, 2, 1)) == 0.125
        with pytest.raises(ValueError):
            nc.taper_delta((2, 1, 1))

    def test_taper_profile(self):
        x = np.array([0.0, 0.125, 0.5, 0.875, 1.0])
        assert nc.taper(x, 0.125).tolist() == pytest.approx([0.0, 1.0, 1.0, 1.0, 0.0])

    def test_tapered_mass(self, cantor_build):
        state = cantor_build.final
        delta = nc.taper_delta(state.t)
        _, share = nc.taper_weights(state, delta)
        value = nc.tapered_fourier(state, np.array([0.0]), delta)[0]
        assert value.real == pytest.approx(math.fsum(share * state.weights), abs=1e-12)
        assert 0.0 < value.real <= 1.0 + 1e-12

