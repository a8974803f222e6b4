import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optoshake.model import (HBAR, K_B, REFERENCE, ModulationParams, ParameterError, PhysicalParams,
                             ReducedParams, drive_amplitude, reduce, thermal_occupation)


def bose(omega, T):
    x = mpmath.mpf(HBAR) * omega / (mpmath.mpf(K_B) * T)
    return float(1 / mpmath.expm1(x))


@pytest.mark.parametrize("T", [1e-3, 0.05, 0.5, 4.0, 300.0])
def test_thermal_occupation_matches_bose_einstein(T):
    w = 2 * math.pi * 10.56e6
    assert thermal_occupation(w, T) == pytest.approx(bose(w, T), rel=1e-13)


def test_thermal_occupation_at_device_temperature():
    n = thermal_occupation(2 * math.pi * 10.56e6, 0.5)
    assert 976 <= n <= 996


def test_thermal_occupation_high_temperature_limit():
    w, T = 2 * math.pi * 1e6, 10.0
    classical = K_B * T / (HBAR * w)
    assert thermal_occupation(w, T) == pytest.approx(classical - 0.5, rel=1e-6)


def test_zero_temperature_and_errors():
    assert thermal_occupation(1e7, 0.0) == 0.0
    assert thermal_occupation(1e7, 1e-9) == 0.0
    with pytest.raises(ParameterError):
        thermal_occupation(1e7, -1.0)
    with pytest.raises(ParameterError):
        thermal_occupation(0.0, 1.0)


def test_drive_amplitude():
    P, kappa, wl = 1e-6, 2e6, 3e14
    assert drive_amplitude(P, kappa, wl) == pytest.approx(math.sqrt(2 * kappa * P / (HBAR * wl)))
    assert drive_amplitude(0.0, kappa, wl) == 0.0
    with pytest.raises(ParameterError):
        drive_amplitude(-1.0, kappa, wl)


@pytest.mark.parametrize("bad", [dict(kappa=-1.0), dict(gamma=-0.1), dict(n_th=-2.0),
                                 dict(nu=0.0), dict(xi=-1.0), dict(G_re=math.nan)])
def test_reduced_params_validation(bad):
    base = dict(delta_c_prime=1.0, G_re=0.1, kappa=0.1, gamma=0.01)
    with pytest.raises(ParameterError):
        ReducedParams(**{**base, **bad})


def test_reduced_replace_complex_coupling():
    r = ReducedParams(delta_c_prime=1.0, G_re=0.1, kappa=0.1, gamma=0.01)
    s = r.replace(G=0.3 - 0.4j)
    assert s.G == 0.3 - 0.4j and s.G_re == 0.3 and s.G_im == -0.4
    assert not s.modulated and s.replace(xi=1.0).modulated


def test_modulation_validation():
    with pytest.raises(ParameterError):
        ModulationParams(xi=-0.1, nu=1.0)
    with pytest.raises(ParameterError):
        ModulationParams(xi=1.0, nu=0.0)


def test_reduce_with_override_uses_bare_detuning():
    phys = REFERENCE.physical(delta_c=1.0, T=0.5)
    r = reduce(phys, ModulationParams(2.2, 30.0), G_override=REFERENCE.omega_m * (1 + 0.5j))
    assert r.delta_c_prime == pytest.approx(1.0, rel=1e-12)
    assert r.G == pytest.approx(1 + 0.5j)
    assert r.kappa == pytest.approx(200e3 / 10.56e6)
    assert r.gamma == pytest.approx(32 / 10.56e6)
    assert r.g == pytest.approx(200 / 10.56e6)
    assert (r.xi, r.nu) == (2.2, 30.0)
    assert 976 <= r.n_th <= 996


def test_reduce_needs_power_or_override():
    with pytest.raises(ParameterError):
        reduce(REFERENCE.physical(delta_c=1.0))


def test_reduce_with_power_runs_calibration():
    phys = REFERENCE.physical(delta_c=1.0, P=1e-7)
    r = reduce(phys)
    E = drive_amplitude(1e-7, phys.kappa, phys.omega_l)
    assert r.E == pytest.approx(E / phys.omega_m)
    # the static shift is towards smaller detuning and G = g*alpha
    assert 0 < r.delta_c_prime < 1.0
    alpha = E / math.hypot(phys.kappa / 2, r.delta_c_prime * phys.omega_m)
    assert abs(r.G) == pytest.approx(phys.g * alpha / phys.omega_m, rel=1e-9)


@given(st.floats(0.1, 10.0))
def test_reduction_is_scale_free(lam):
    """Scaling every frequency and the temperature by the same factor leaves
    the reduced parameters unchanged."""
    p = REFERENCE.physical(delta_c=1.3, T=0.2)
    scaled = PhysicalParams(omega_c=lam * p.omega_c, omega_m=lam * p.omega_m,
                            omega_l=lam * p.omega_l, kappa=lam * p.kappa, gamma=lam * p.gamma,
                            g=lam * p.g, T=lam * p.T)
    a = reduce(p, G_override=0.7 * p.omega_m).as_dict()
    b = reduce(scaled, G_override=0.7 * scaled.omega_m).as_dict()
    for key in a:
        assert b[key] == pytest.approx(a[key], rel=1e-9, abs=1e-12)


def test_reference_reduced_defaults():
    r = REFERENCE.reduced(G=1.0, xi=2.2, nu=30.0, n_th=1000.0)
    assert r.kappa == pytest.approx(0.0189393939, rel=1e-8)
    assert r.n_th == 1000.0 and r.G == 1.0
