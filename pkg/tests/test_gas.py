import math

import numpy as np
import pytest

from wedgeflow.gas import (
    GasModel,
    SelfSimilarPoint,
    VacuumError,
    constant_state_potential,
    density_sound_pseudo_mach,
    pi_inverse,
    pi_of_rho,
)

AIR = GasModel(gamma=1.4)
ISO = GasModel(gamma=1.0)


def test_pi_at_reference_is_zero():
    assert pi_of_rho(AIR, 1.0) == 0.0
    assert pi_of_rho(ISO, 1.0) == 0.0


def test_pi_isothermal_log():
    assert pi_of_rho(ISO, math.e) == pytest.approx(1.0, abs=1e-15)


def test_pi_air_direct_value():
    # (2^0.4 - 1)/0.4 evaluated independently with mpmath at 50 digits
    expected = 0.798769776932235648435
    assert pi_of_rho(AIR, 2.0) == pytest.approx(expected, rel=1e-15)


def test_pressure_and_pi_reference_identities():
    for model in (AIR, ISO, GasModel(gamma=3.0, rho0=0.7, c0=2.5)):
        assert model.pressure(model.rho0) == pytest.approx(
            model.c0**2 * model.rho0 / model.gamma, rel=1e-15
        )
        assert pi_of_rho(model, model.rho0) == pytest.approx(0.0, abs=1e-14)


def test_nonpositive_density_rejected():
    with pytest.raises(VacuumError):
        pi_of_rho(AIR, 0.0)
    with pytest.raises(VacuumError):
        pi_of_rho(AIR, -1.0)


def test_pi_inverse_at_reference():
    for model in (AIR, ISO, GasModel(gamma=5 / 3, rho0=2.0, c0=0.5)):
        assert pi_inverse(model, 0.0) == pytest.approx(model.rho0, rel=1e-15)


def test_pi_inverse_vacuum_bound():
    # c0^2/(gamma-1) = 2.5 for air with c0 = 1
    rho = pi_inverse(AIR, -2.5 + 1e-12)
    assert rho > 0.0
    assert rho < 1e-25
    with pytest.raises(VacuumError):
        pi_inverse(AIR, -2.5)
    with pytest.raises(VacuumError):
        pi_inverse(AIR, -3.0)
    # isothermal gas has no vacuum bound
    assert pi_inverse(ISO, -100.0) > 0.0


@pytest.mark.parametrize("gamma", [1.0, 1.4, 5 / 3])
def test_pi_round_trip(gamma):
    model = GasModel(gamma=gamma, rho0=1.3, c0=0.8)
    rho = np.geomspace(1e-3, 1e3, 301)
    back = pi_inverse(model, pi_of_rho(model, rho))
    assert np.max(np.abs(back / rho - 1.0)) < 1e-12


def test_pi_round_trip_stiff_gamma():
    # at gamma = 3 and rho = 1e-3 rho0 the float width of pi near the vacuum
    # bound caps the attainable round-trip accuracy near 1e-10
    model = GasModel(gamma=3.0, rho0=1.3, c0=0.8)
    rho = np.geomspace(1e-3, 1e3, 301)
    back = pi_inverse(model, pi_of_rho(model, rho))
    assert np.max(np.abs(back / rho - 1.0)) < 1e-9


@pytest.mark.parametrize("gamma", [1.0, 1.4, 3.0])
def test_pi_strictly_increasing(gamma):
    model = GasModel(gamma=gamma)
    rho = np.geomspace(1e-3, 1e3, 200)
    vals = pi_of_rho(model, rho)
    assert np.all(np.diff(vals) > 0.0)


@pytest.mark.parametrize("gamma", [1.0, 1.4, 5 / 3, 3.0])
def test_sound_speed_matches_pressure_derivative(gamma):
    # c^2 = p_rho via central differences
    model = GasModel(gamma=gamma, rho0=1.1, c0=1.7)
    for rho in np.geomspace(1e-2, 1e2, 17):
        h = 1e-6 * rho
        p_rho = (model.pressure(rho + h) - model.pressure(rho - h)) / (2 * h)
        assert model.sound_speed(rho) ** 2 == pytest.approx(p_rho, rel=1e-8)


def test_gamma_to_one_limit():
    near = GasModel(gamma=1.0 + 1e-8)
    rho = np.geomspace(1e-2, 1e2, 50)
    a, b = pi_of_rho(near, rho), pi_of_rho(ISO, rho)
    mask = np.abs(b) > 1e-12
    assert np.max(np.abs((a[mask] - b[mask]) / b[mask])) < 1e-6


def test_reference_self_similar_point():
    p = SelfSimilarPoint(xi=(0.3, -0.2), chi=-0.5 * 0.13, z=(0.0, 0.0))
    # chi chosen so that -chi - |z|^2/2 = |xi|^2/2 ... irrelevant; use plain zero state:
    p0 = SelfSimilarPoint(xi=(0.0, 0.0), chi=0.0, z=(0.0, 0.0))
    rho, c, L = density_sound_pseudo_mach(AIR, p0)
    assert (rho, c, L) == (pytest.approx(1.0), pytest.approx(1.0), 0.0)
    assert p.psi == pytest.approx(p.chi + 0.5 * (0.3**2 + 0.2**2))
    assert np.allclose(p.v, p.z + p.xi)


def test_isothermal_direct_point():
    p = SelfSimilarPoint(xi=(0.0, 0.0), chi=-1.0, z=(1.0, 0.0))
    rho, c, L = density_sound_pseudo_mach(ISO, p)
    assert rho == pytest.approx(math.exp(0.5), rel=1e-14)
    assert c == pytest.approx(1.0)
    assert L == pytest.approx(1.0)


@pytest.mark.parametrize("gamma", [1.0, 1.4])
def test_constant_state_pseudo_mach_circle(gamma):
    # affine potential: L = |xi - v|/c, so L = 1 exactly on |xi - v| = c
    model = GasModel(gamma=gamma)
    rho_c, v_c = 1.7, np.array([0.4, -0.1])
    psi, _ = constant_state_potential(model, rho_c, v_c)
    c_c = float(model.sound_speed(rho_c))
    rng = np.random.default_rng(7)
    for ang in rng.uniform(0, 2 * math.pi, 12):
        xi = v_c + c_c * np.array([math.cos(ang), math.sin(ang)])
        chi = psi(xi) - 0.5 * xi @ xi
        p = SelfSimilarPoint(xi=xi, chi=chi, z=v_c - xi)
        rho, c, L = density_sound_pseudo_mach(model, p)
        assert rho == pytest.approx(rho_c, rel=1e-13)
        assert c == pytest.approx(c_c, rel=1e-13)
        assert L == pytest.approx(1.0, abs=1e-13)
