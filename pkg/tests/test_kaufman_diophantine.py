import math

import numpy as np
import pytest

from config import config
from services import kaufman_diophantine as kd
from services.core_measure import quadrature_oracle


@pytest.fixture(scope="module")
def params_small():
    return kd.KaufmanParams(1.0, (1e3,), 1.0)


@pytest.fixture(scope="module")
def params_desk():
    return kd.make_params(1.0, [1e4, 1e7])


class TestPhi:
    def test_calibration(self, phi):
        report = phi.report
        assert report["min_phi"] >= 0.0
        assert report["min_phi_hat"] > 0.0
        assert report["integral"] == pytest.approx(1.0, abs=1e-8)
        assert report["integral_quadrature"] == pytest.approx(1.0, abs=1e-6)

    def test_support(self, phi):
        assert phi.phi(np.array([1.0, 1.5, -2.0])).tolist() == pytest.approx([0.0, 0.0, 0.0], abs=1e-14)

    def test_quartic_asymptotics(self, phi):
        xi = 1e4
        assert xi ** 4 * phi.phi_hat(np.array([xi]))[0] == pytest.approx(phi.asymptotic_constant, rel=1e-2)

    def test_tail_radius(self, phi):
        W = phi.tail_radius(1e3, 1e-6)
        assert W >= 16_000
        assert phi.tail_bound(1e3, W) <= 1e-6

    def test_cached(self, phi):
        assert kd.build_phi() is phi


class TestPrimeSets:
    def test_sieve(self):
        assert kd.simple_sieve(30).tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
        assert kd.simple_sieve(1).size == 0

    def test_sets(self, params_small):
        mu_sets, nu_sets = kd.prime_sets(params_small)
        assert mu_sets[0].tolist() == [1, 2, 3, 5, 7, 11, 13]
        assert nu_sets[0].tolist() == [5, 7, 11, 13]

    def test_explicit_cs(self):
        params = kd.make_params(1.0, [1e4, 1e7], C_s=3.0)
        nu = kd.prime_sets(params)[1][0]
        assert nu[0] == 5 and nu[-1] == 47

    def test_empty_nu_set(self):
        with pytest.raises(kd.PrimeSetError):
            kd.prime_sets(kd.KaufmanParams(1.0, (10.0,), 64.0))

    def test_calibration_at_full_dimension(self, params_desk):
        assert params_desk.C_s == 1.0
        assert params_desk.calibration_met
        assert "desk_scale_q" in params_desk.flags

    def test_calibration_not_met_is_flagged(self):
        params = kd.make_params(0.5, [1e4, 1e7])
        assert not params.calibration_met
        assert "cs_calibration_not_met" in params.flags


class TestCoefficients:
    def test_factor_at_zero(self, params_desk, phi):
        for variant in ("mu", "nu"):
            assert kd.coeff_F(1, variant, 0, params_desk, phi) == 1.0

    def test_positive_product(self, params_desk, phi):
        coeffs = kd.product_coeffs(1, "mu", params_desk, phi, K_out=1 << 12).coefficients()
        assert coeffs.K_max == 1 << 12
        assert coeffs.values.min() > 0.0

    def test_two_level_product_positive_and_finite(self, phi):
        params = kd.KaufmanParams(1.0, (1e3, 1e5), 1.0)
        coeffs = kd.product_coeffs(2, "mu", params, phi, K_out=1 << 12).coefficients()
        assert np.all(np.isfinite(coeffs.values))
        assert coeffs.values.min() > 0.0

    def test_coefficients_match_density(self, params_small, phi):
        product = kd.product_coeffs(1, "mu", params_small, phi, K_out=1 << 12)
        coeffs = product.coefficients()
        density = kd.product_density(1, "mu", params_small, phi)
        ks = np.linspace(0, 4000, 17).astype(np.int64)
        for k in ks:
            oracle = quadrature_oracle(density, -0.5, 0.5, float(k), 1 << 18)
            assert abs(coeffs.at(k) - oracle) < 1e-6

    def test_transform_at_integers_matches_coefficients(self, params_small, phi):
        product = kd.product_coeffs(1, "mu", params_small, phi, K_out=1 << 10)
        ks = np.array([0, 17, 210, 999])
        assert np.abs(product.transform(ks.astype(float)) - product.coefficients().at(ks)).max() < 1e-10

    def test_window_budget(self, params_small, phi, monkeypatch):
        monkeypatch.setattr(config, "KAUFMAN_MAX_WINDOW", 1000)
        with pytest.raises(kd.TruncationBudgetError):
            kd.product_coeffs(1, "mu", params_small, phi, K_out=1 << 12)

    def test_window_lookup_is_bounded(self, params_small, phi):
        coeffs = kd.product_coeffs(1, "mu", params_small, phi, K_out=64).coefficients()
        with pytest.raises(kd.TruncationBudgetError):
            coeffs.at(65)


class TestChecks:
    def test_separation(self, params_desk):
        assert kd.separation_check(params_desk, 1)["passed"]

    def test_pointwise_comparison(self, params_desk, phi):
        report = kd.pointwise_comparison(params_desk, 1, phi)
        assert report["applicable"]
        assert report["factor"] > 1.0

    def test_averaging(self, params_desk, phi):
        report = kd.averaging_check(1, params_desk, phi, samples=100)
        assert report["exponent"] == kd.AVERAGING_EXPONENT
        assert report["mu_positive"]
        assert math.isfinite(report["C_eps"])

    def test_frostman(self, params_desk, phi):
        report = kd.frostman_nu(1, params_desk, phi)
        assert all(entry["matches"] for entry in report["sup_norms"])
        assert all(entry["passed"] for entry in report["separation"])
        assert report["sup_ball_mass"] > 0.0

    def test_divisor_bound(self, params_desk):
        report = kd.divisor_bound_check(params_desk, 1, np.arange(2, 2002))
        assert report["applicable"]
        assert math.isfinite(report["constant"])

    def test_stability_improves_with_q(self, phi):
        small = kd.stability_check("one", 1, kd.KaufmanParams(1.0, (1e3,), 1.0), phi)
        large = kd.stability_check("one", 1, kd.KaufmanParams(1.0, (1e4,), 1.0), phi)
        assert large["max_difference"] < small["max_difference"]
        assert small["difference_at_zero"] == 0.0

    def test_unknown_test_function(self, params_desk, phi):
        with pytest.raises(ValueError):
            kd.stability_check("cos", 1, params_desk, phi)


def test_decay_fit_over_valid_bands(params_small, phi):
    from services.core_measure import band_envelope

    product = kd.product_coeffs(1, "mu", params_small, phi, K_out=1 << 16)
    profile = band_envelope(product.transform, 4, 15, samples_per_band=64, sampling="grid",
                            discard_low_bands=0, tag="kaufman")
    assert profile.fitted_beta is not None
    assert profile.fitted_beta >= params_small.s - 0.25


class TestGoldenConstants:
    @pytest.fixture(scope="class")
    def gold(self, golden, params_desk):
        gold = golden("kaufman_desk")
        assert list(params_desk.q) == gold["q"]
        assert params_desk.C_s == gold["C_s"]
        return gold

    def test_stability_constant(self, gold, params_desk, phi):
        report = kd.stability_check("phi", 1, params_desk, phi)
        recorded = gold.pilot("stability_phi_implied_constant", report["implied_constant"])
        assert math.isfinite(report["implied_constant"])
        assert report["implied_constant"] == pytest.approx(recorded, rel=1e-9)

    def test_frostman_constant(self, gold, params_desk, phi):
        report = kd.frostman_nu(1, params_desk, phi)
        recorded = gold.pilot("frostman_fitted_constant", report["fitted_constant"])
        assert report["fitted_constant"] == pytest.approx(recorded, rel=1e-9)

    def test_averaging_constant(self, gold, params_desk, phi):
        report = kd.averaging_check(1, params_desk, phi, samples=500)
        assert report["exponent"] == gold["averaging_exponent"]
        recorded = gold.pilot("averaging_C_eps", report["C_eps"])
        assert report["C_eps"] == pytest.approx(recorded, rel=1e-9, abs=1e-15)
