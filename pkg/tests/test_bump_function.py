import numpy as np
import pytest

from services.bump_function import PHI0_HAT_CUTOFF, bump, phi0, phi0_hat, smooth_step


def test_bump_support():
    assert bump(np.array([-0.5, 0.5, 0.7])).tolist() == [0.0, 0.0, 0.0]
    assert bump(np.array([0.0]))[0] == pytest.approx(np.exp(-1.0))


def test_phi0_normalization():
    values = phi0(np.array([-0.5, 0.0, 0.5, 1.0, 1.2]))
    assert values[0] == pytest.approx(0.5, abs=1e-8)
    assert values[2] == pytest.approx(0.5, abs=1e-8)
    assert values[1] > 0.5
    assert values[3] == 0.0 and values[4] == 0.0


def test_phi0_decreasing_in_modulus():
    x = np.linspace(0.0, 0.99, 200)
    assert np.all(np.diff(phi0(x)) <= 1e-12)


def test_phi0_hat_integral_matches_quadrature():
    x = np.linspace(-1.0, 1.0, (1 << 16) + 1)
    mass = np.trapz(phi0(x), x)
    assert phi0_hat(np.array([0.0]))[0] == pytest.approx(mass, rel=1e-6)


def test_phi0_hat_nonnegative_and_cut():
    xi = np.linspace(-600.0, 600.0, 4001)
    values = phi0_hat(xi)
    assert values.min() >= 0.0
    assert np.all(values[np.abs(xi) > PHI0_HAT_CUTOFF] == 0.0)


def test_smooth_step():
    u = np.linspace(-0.5, 1.5, 401)
    values = smooth_step(u)
    assert values[0] == 0.0 and values[-1] == 1.0
    assert np.all(np.diff(values) >= -1e-12)
