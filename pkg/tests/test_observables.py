import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optoshake.dynamics import SYMPLECTIC_FORM
from optoshake.observables import (BlockDecomposition, ObservableSeries,
                                   UnphysicalCovarianceError, UnsettledSeriesError, eta_minus,
                                   log_negativity, period_average, period_bins, phonon_number,
                                   phonon_number_raw, transient_cutoff)

Z = np.diag([1.0, -1.0])


def tmsv(r):
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    return 0.5 * np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])


def thermal(n1, n2):
    return np.diag([n1 + 0.5, n1 + 0.5, n2 + 0.5, n2 + 0.5])


def local_symplectic(theta, s):
    R = np.array([[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]])
    return R @ np.diag([math.exp(s), math.exp(-s)])


def eta_minus_oracle(V):
    """Smallest symplectic eigenvalue of the partial transpose from the
    spectrum of ``i Omega V~``."""
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    Vt = P @ V @ P
    return float(np.min(np.abs(np.linalg.eigvals(1j * SYMPLECTIC_FORM @ Vt))))


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 2.0])
def test_two_mode_squeezed_negativity(r):
    assert log_negativity(tmsv(r)) == pytest.approx(2 * r, abs=1e-10)


def test_separable_states_have_zero_negativity():
    assert log_negativity(thermal(0, 0)) == 0.0
    assert log_negativity(thermal(3.0, 1000.0)) == 0.0


@given(st.floats(0, 2), st.floats(0, 5), st.floats(0, 5), st.floats(-math.pi, math.pi),
       st.floats(-1, 1), st.floats(-math.pi, math.pi), st.floats(-1, 1))
def test_eta_minus_against_spectrum(r, n1, n2, t1, s1, t2, s2):
    """Agreement with the spectral oracle on thermal-noise-added two-mode
    squeezed states dressed with local symplectic operations (which must
    leave the negativity unchanged)."""
    V = tmsv(r) + np.diag([n1, n1, n2, n2])
    S = np.block([[local_symplectic(t1, s1), np.zeros((2, 2))],
                  [np.zeros((2, 2)), local_symplectic(t2, s2)]])
    W = S @ V @ S.T
    # the closed form keeps ~sqrt(eps) absolute accuracy when eta_+ ~ eta_-
    assert eta_minus(W) == pytest.approx(eta_minus_oracle(W), rel=1e-10, abs=1e-7)
    assert log_negativity(W) == pytest.approx(log_negativity(V), abs=1e-7)


@pytest.mark.parametrize("r", [0.05, 0.5, 2.0, 4.0])
@pytest.mark.parametrize("n", [0.0, 0.3, 5.0])
def test_eta_minus_relative_accuracy_when_entangled(r, n):
    V = tmsv(r) + np.diag([n, n, 0.0, 0.0])
    assert eta_minus(V) == pytest.approx(eta_minus_oracle(V), rel=1e-9)


def test_batched_evaluation():
    Vs = np.stack([tmsv(0.1), tmsv(1.0), thermal(0, 2)])
    np.testing.assert_allclose(log_negativity(Vs), [0.2, 2.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(phonon_number(Vs), [math.sinh(0.1) ** 2, math.sinh(1.0) ** 2, 2.0],
                               atol=1e-12)


def test_unphysical_covariance_is_rejected():
    with pytest.raises(UnphysicalCovarianceError):
        eta_minus(np.diag([1.0, 1.0, 1.0, -50.0]))


def test_phonon_number_clamp():
    V = thermal(0, 0)
    V[2, 2] -= 1e-10
    assert phonon_number_raw(V) < 0
    assert phonon_number(V) == 0.0
    V[2, 2] -= 1e-3
    assert phonon_number(V) < 0


def test_block_decomposition_roundtrip():
    V = tmsv(0.3) + 0.1
    blocks = BlockDecomposition.of(V)
    np.testing.assert_array_equal(blocks.assemble(), V)
    np.testing.assert_array_equal(blocks.C_block, V[:2, 2:])


def test_series_validation():
    with pytest.raises(ValueError):
        ObservableSeries(np.arange(3), np.arange(4))


# -- transients and averages ------------------------------------------------

def test_period_average_is_exact_for_periodic_signals():
    nu = 3.0
    T = 2 * math.pi / nu
    t = np.arange(0, 40 * 64) * (T / 64)
    t = np.append(t, 40 * T)
    y = 2.0 + np.sin(nu * t) + 0.3 * np.cos(2 * nu * t)
    s = ObservableSeries(t, y)
    assert period_average(s, nu, 10) == pytest.approx(2.0, abs=1e-13)


def test_transient_cutoff_on_exponential_relaxation():
    nu, tau = 1.0, 50.0
    T = 2 * math.pi
    t = np.arange(0, 2000 * 32) * (T / 32)
    s = ObservableSeries(t, 1.0 + np.exp(-t / tau))
    cut = transient_cutoff(s, nu, rtol=1e-4, run=5)
    assert cut.settled
    # consecutive bin means differ by ~exp(-t/tau)(1 - exp(-T/tau)); the
    # value itself is ~1 once settled
    expected = tau * math.log((1 - math.exp(-T / tau)) / 1e-4)
    assert abs(cut.t_ss - expected) <= T
    assert period_average(s, nu, 10) == pytest.approx(1.0, abs=1e-10)


def test_unsettled_series():
    t = np.linspace(0, 100, 1001)
    s = ObservableSeries(t, np.exp(0.05 * t))
    cut = transient_cutoff(s, 1.0)
    assert not cut.settled and cut.t_ss == 100.0
    with pytest.raises(UnsettledSeriesError):
        period_average(s, 1.0, 2)
    assert period_average(s, 1.0, 2, require_settled=False) > 100
    with pytest.raises(UnsettledSeriesError):
        period_average(ObservableSeries(t[:5], t[:5]), 1.0, 10, require_settled=False)


def test_period_bins():
    t = np.arange(12) * (math.pi / 2)
    starts, means = period_bins(ObservableSeries(t, np.arange(12.0)), 1.0)
    np.testing.assert_allclose(starts, [0, 2 * math.pi, 4 * math.pi])
    np.testing.assert_allclose(means, [1.5, 5.5, 9.5])
    # an end point on the next period boundary does not form a bin
    t = np.append(t, 6 * math.pi)
    starts, means = period_bins(ObservableSeries(t, np.append(np.arange(12.0), 100.0)), 1.0)
    assert len(starts) == 3
    # one sample per period (stroboscopic) keeps every sample
    t = np.arange(5) * 2 * math.pi
    assert len(period_bins(ObservableSeries(t, t), 1.0)[0]) == 5
