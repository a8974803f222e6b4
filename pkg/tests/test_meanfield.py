import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optoshake.dynamics import StepPolicy
from optoshake.meanfield import (MeanFieldConvergenceError, MeanFieldDivergenceError,
                                 MeanFieldState, _relations, alpha_for_coupling, coupling_profile,
                                 integrate_mean_fields, periodic_alpha, steady_mean_fields)
from optoshake.model import REFERENCE, PhysicalParams, ReducedParams, drive_amplitude


def toy(delta_c=1.0, g=0.05):
    # reduced-like units, strongly damped so the cubic has a single root
    return PhysicalParams(omega_c=100.0, omega_m=1.0, omega_l=100.0 - delta_c, kappa=0.8,
                          gamma=0.1, g=g)


def test_zero_drive():
    state, dprime, G = steady_mean_fields(toy(), 0.0)
    assert state.alpha == 0 and state.beta == 0 and G == 0 and dprime == 1.0
    assert state.branches == 1


@given(st.floats(0.0, 3.0), st.floats(-2.0, 3.0))
def test_fixed_point_residuals(E, delta_c):
    params = toy(delta_c)
    try:
        state, dprime, G = steady_mean_fields(params, E)
    except MeanFieldConvergenceError:
        return
    res = _relations(E, delta_c, params.kappa, params.gamma, params.omega_m, params.g,
                     state.alpha, state.beta, dprime)
    assert max(res) < 1e-12
    assert G == pytest.approx(params.g * state.alpha)
    # independent check of the three relations
    alpha = -1j * E / (params.kappa / 2 + 1j * dprime)
    assert state.alpha == pytest.approx(alpha, rel=1e-10, abs=1e-14)
    assert dprime == pytest.approx(delta_c - 2 * params.g * state.beta.real, rel=1e-10, abs=1e-12)


@given(st.floats(0, 2 * math.pi))
def test_phase_invariance(phi):
    params = toy(1.5)
    E = 2.0
    s0, d0, G0 = steady_mean_fields(params, E)
    s1, d1, G1 = steady_mean_fields(params, E * cmath.exp(1j * phi))
    assert d1 == pytest.approx(d0, rel=1e-11)
    assert abs(s1.alpha) == pytest.approx(abs(s0.alpha), rel=1e-11)
    assert s1.alpha == pytest.approx(s0.alpha * cmath.exp(1j * phi), rel=1e-10)
    assert s1.beta == pytest.approx(s0.beta, rel=1e-10)


def test_bistable_drive():
    phys = REFERENCE.physical(delta_c=1.0, P=1e-8)
    E = drive_amplitude(1e-8, phys.kappa, phys.omega_l)
    state, dprime, G = steady_mean_fields(phys, E)
    assert state.branches == 3
    # the iteration follows the branch connected to weak drive
    assert 0.99 * phys.omega_m < dprime < phys.delta_c
    with pytest.raises(MeanFieldConvergenceError):
        steady_mean_fields(phys, E, strict=True)


def test_unreachable_branch_is_reported():
    # past the upper turning point the damped iteration oscillates between
    # branches and no unique solution exists
    phys = REFERENCE.physical(delta_c=1.0, P=2e-6)
    E = drive_amplitude(2e-6, phys.kappa, phys.omega_l)
    try:
        state, dprime, _ = steady_mean_fields(phys, E)
    except MeanFieldConvergenceError as exc:
        assert exc.residuals
    else:
        assert state.branches == 1


def test_degenerate_cavity():
    params = PhysicalParams(omega_c=10.0, omega_m=1.0, omega_l=10.0, kappa=0.0, gamma=0.1, g=0.1)
    with pytest.raises(ValueError):
        steady_mean_fields(params, 1.0)


def test_state_validation_and_alpha_for_coupling():
    with pytest.raises(ValueError):
        MeanFieldState(complex(math.inf, 0), 0j)
    assert alpha_for_coupling(0.5, 0.01) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        alpha_for_coupling(0.5, 0.0)


def test_integration_converges_to_steady_state():
    r = ReducedParams(delta_c_prime=0.7, G_re=0.0, kappa=0.8, gamma=0.3, g=0.05, E=1.5, nu=1.0)
    traj = integrate_mean_fields(r, t_span=200.0, stride=50)
    alpha = -1j * r.E / (r.kappa / 2 + 1j * r.delta_c_prime)
    beta = 1j * r.g * abs(alpha) ** 2 / (r.gamma / 2 + 1j)
    assert traj.alpha[-1] == pytest.approx(alpha, abs=1e-8)
    assert traj.beta[-1] == pytest.approx(beta, abs=1e-8)
    assert len(traj) == len(traj.states) and traj.state(0) == MeanFieldState(0j, 0j)


def test_free_decay_rates():
    r = ReducedParams(delta_c_prime=0.4, G_re=0.0, kappa=0.3, gamma=0.1, g=0.0, E=0.0, nu=1.0)
    init = MeanFieldState(1.0 + 0.5j, 2.0 - 1j)
    traj = integrate_mean_fields(r, t_span=20.0, initial=init)
    t = traj.times
    # RK4 truncation error of the h ~ 0.012 step is a few 1e-9
    np.testing.assert_allclose(np.abs(traj.alpha) ** 2, 1.25 * np.exp(-0.3 * t), rtol=1e-7)
    np.testing.assert_allclose(np.abs(traj.beta) ** 2, 5.0 * np.exp(-0.1 * t), rtol=1e-7)


def test_divergence_bound():
    r = ReducedParams(delta_c_prime=0.0, G_re=0.0, kappa=0.0, gamma=0.1, E=1.0, nu=1.0)
    with pytest.raises(MeanFieldDivergenceError):
        integrate_mean_fields(r, t_span=100.0, max_amplitude=10.0)


def test_periodic_orbit_solves_modulated_equation():
    r = ReducedParams(delta_c_prime=1.0, G_re=0.0, kappa=0.1, gamma=0.01, E=0.7, xi=2.2,
                      nu=7.0)
    alpha = periodic_alpha(r)
    t = np.linspace(0.0, 2.0, 41)
    h = 1e-5
    deriv = (alpha(t + h) - alpha(t - h)) / (2 * h)
    rhs = (-1j * (r.delta_c_prime + r.xi * r.nu * np.cos(r.nu * t)) - r.kappa / 2) * alpha(t) \
        - 1j * r.E
    np.testing.assert_allclose(deriv, rhs, atol=1e-6)
    period = 2 * math.pi / r.nu
    np.testing.assert_allclose(alpha(t + period), alpha(t), atol=1e-12)


def test_periodic_orbit_is_the_attractor():
    r = ReducedParams(delta_c_prime=1.0, G_re=0.0, kappa=0.5, gamma=0.2, E=0.7, xi=1.5, nu=4.0)
    errors = []
    for n in (128, 256):
        traj = integrate_mean_fields(r, t_span=80.0, step_policy=StepPolicy(n, 8))
        errors.append(abs(traj.alpha[-1] - periodic_alpha(r)(traj.times[-1])))
    assert errors[1] < 1e-7
    # fourth-order convergence onto the closed-form orbit
    assert 12 < errors[0] / errors[1] < 20


def test_coupling_profile():
    r = ReducedParams(delta_c_prime=1.0, G_re=0.0, kappa=0.1, gamma=0.01, E=0.7, g=0.02,
                      xi=1.0, nu=5.0)
    G = coupling_profile(r)
    assert G(0.3) == pytest.approx(0.02 * periodic_alpha(r)(0.3))
    with pytest.raises(ValueError):
        coupling_profile(r.replace(g=0.0))
