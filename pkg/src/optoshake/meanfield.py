"""Classical mean fields of the driven cavity and the mechanical resonator.

The steady state fixes the static radiation-pressure shift of the detuning
and the linearized coupling ``G = g*alpha`` used by the fluctuation
dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import StepPolicy
from .model import PhysicalParams, ReducedParams
from .sidebands import bessel_j_orders, default_truncation

DAMPING = 0.5
MAX_ITER = 10_000
TOL = 1e-12


class MeanFieldConvergenceError(RuntimeError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class MeanFieldDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeanFieldState:
    """Static mean fields; ``branches`` counts the coexisting fixed points
    (more than one in the bistable regime)."""

    alpha: complex
    beta: complex
    branches: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("mean fields must be finite")


@dataclass(frozen=True)
class MeanFieldTrajectory:
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> MeanFieldState:
        return MeanFieldState(complex(self.alpha[i]), complex(self.beta[i]))

    @property
    def states(self) -> list[MeanFieldState]:
        return [self.state(i) for i in range(len(self))]


def _relations(E, delta_c, kappa, gamma, omega_m, g, alpha, beta, dprime):
    """Relative residuals of the three fixed-point relations."""
    a_rhs = -1j * E / (kappa / 2 + 1j * dprime)
    b_rhs = 1j * g * abs(alpha) ** 2 / (gamma / 2 + 1j * omega_m)
    d_rhs = delta_c - g * 2.0 * beta.real
    def rel(x, y):
        scale = max(abs(x), abs(y))
        return abs(x - y) / scale if scale else 0.0
    d_scale = max(abs(dprime), abs(d_rhs), abs(delta_c), omega_m)
    return [rel(alpha, a_rhs), rel(beta, b_rhs), abs(dprime - d_rhs) / d_scale]


def _photon_number_roots(E2, delta_c, kappa, chi):
    """Positive real roots n of ``n*(kappa^2/4 + (delta_c - chi*n)^2) = |E|^2``."""
    if chi == 0.0:
        return [E2 / (kappa**2 / 4 + delta_c**2)]
    coeffs = [chi**2, -2 * chi * delta_c, kappa**2 / 4 + delta_c**2, -E2]
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-7 * np.maximum(np.abs(roots), 1e-300)].real
    return sorted(float(r) for r in real if r > 0)


def steady_mean_fields(params: PhysicalParams, E: complex, *, strict: bool = False):
    """Static (``xi = 0``) mean-field fixed point.

    Solves ``alpha = -iE/(kappa/2 + i*Delta')``,
    ``beta = i*g*|alpha|^2/(gamma/2 + i*omega_m)`` and
    ``Delta' = Delta_c - g*(beta + beta*)`` by damped fixed-point iteration
    on ``Delta'`` started from ``Delta_c``, which follows the branch connected
    to zero drive.  The number of positive roots of the photon-number cubic
    is recorded in ``state.branches``; with ``strict`` any multistability
    raises :class:`MeanFieldConvergenceError`.  If the iteration does not
    converge, a unique root of the cubic is polished by Newton steps
    instead, and several roots raise.

    Returns ``(MeanFieldState, delta_c_prime, G)`` in the units of
    ``params`` (rad/s for the frequencies, ``alpha`` and ``beta``
    dimensionless).
    """
    kappa, gamma, wm, g = params.kappa, params.gamma, params.omega_m, params.g
    delta_c = params.delta_c
    E = complex(E)
    if kappa == 0 and delta_c == 0:
        raise ValueError("degenerate cavity: kappa = 0 and zero detuning")
    chi = 2.0 * g * g * wm / (gamma**2 / 4 + wm**2)

    def close(dprime):
        alpha = -1j * E / (kappa / 2 + 1j * dprime)
        beta = 1j * g * abs(alpha) ** 2 / (gamma / 2 + 1j * wm)
        return alpha, beta

    roots = _photon_number_roots(abs(E) ** 2, delta_c, kappa, chi)
    if strict and len(roots) > 1:
        raise MeanFieldConvergenceError(
            f"bistable drive: {len(roots)} mean-field branches (photon numbers {roots})")

    dprime = delta_c
    residuals = []
    for _ in range(MAX_ITER):
        alpha, beta = close(dprime)
        target = delta_c - 2.0 * g * beta.real
        residuals = _relations(E, delta_c, kappa, gamma, wm, g, alpha, beta, dprime)
        if max(residuals) < TOL:
            return MeanFieldState(alpha, beta, max(len(roots), 1)), dprime, g * alpha
        dprime = (1 - DAMPING) * dprime + DAMPING * target
        if not math.isfinite(dprime):
            break

    if len(roots) != 1:
        raise MeanFieldConvergenceError(
            f"iteration did not converge and {len(roots)} mean-field branches exist "
            f"(photon numbers {roots}); residuals {residuals}", residuals)
    n = roots[0]
    for _ in range(50):
        # Newton on f(n) = n*(k^2/4 + (dc - chi n)^2) - |E|^2
        d = delta_c - chi * n
        f = n * (kappa**2 / 4 + d * d) - abs(E) ** 2
        fp = kappa**2 / 4 + d * d - 2 * chi * n * d
        if fp == 0:
            break
        step = f / fp
        n -= step
        if abs(step) <= 1e-16 * abs(n):
            break
    dprime = delta_c - chi * n
    alpha, beta = close(dprime)
    residuals = _relations(E, delta_c, kappa, gamma, wm, g, alpha, beta, dprime)
    if max(residuals) >= TOL:
        raise MeanFieldConvergenceError(f"mean-field residuals {residuals}", residuals)
    return MeanFieldState(alpha, beta), dprime, g * alpha


def alpha_for_coupling(G: float, g: float) -> float:
    """Intracavity amplitude ``|alpha| = |G|/g`` needed for a target coupling."""
    if g <= 0:
        raise ValueError("g must be positive")
    return abs(G) / g


def integrate_mean_fields(reduced: ReducedParams, E: complex | None = None, t_span=100.0,
                          step_policy: StepPolicy | None = None, *,
                          initial: MeanFieldState | None = None, stride: int = 1,
                          max_amplitude: float = 1e12) -> MeanFieldTrajectory:
    """RK4 integration of the modulated mean-field equations (reduced units).

    ``delta_c_prime`` is held at its value in ``reduced``; the modulation
    enters as ``xi*nu*cos(nu*t)`` on the cavity detuning.  Raises
    :class:`MeanFieldDivergenceError` if ``|alpha|`` exceeds
    ``max_amplitude``.
    """
    policy = step_policy or StepPolicy()
    E = complex(reduced.E if E is None else E)
    h, _ = policy.resolve(reduced.nu)
    if np.ndim(t_span) == 0:
        t0, t1 = 0.0, float(t_span)
    else:
        t0, t1 = (float(v) for v in t_span)
    n = max(1, math.ceil((t1 - t0) / h - 1e-9))
    state = initial or MeanFieldState(0j, 0j)
    a, b = complex(state.alpha), complex(state.beta)
    dp, k2, g2 = reduced.delta_c_prime, reduced.kappa / 2, reduced.gamma / 2
    amp, nu, g = reduced.xi * reduced.nu, reduced.nu, reduced.g

    def f(t, a, b):
        det = dp + amp * math.cos(nu * t)
        da = (-1j * det - k2) * a - 1j * E
        db = (-1j - g2) * b + 1j * g * (a.real * a.real + a.imag * a.imag)
        return da, db

    times = [t0]
    alphas = [a]
    betas = [b]
    for j in range(n):
        t = t0 + j * h
        a1, b1 = f(t, a, b)
        a2, b2 = f(t + h / 2, a + h / 2 * a1, b + h / 2 * b1)
        a3, b3 = f(t + h / 2, a + h / 2 * a2, b + h / 2 * b2)
        a4, b4 = f(t + h, a + h * a3, b + h * b3)
        a += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        b += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        if not abs(a) <= max_amplitude:
            raise MeanFieldDivergenceError(f"|alpha| exceeded {max_amplitude:g} at t={t + h:.6g}")
        if (j + 1) % stride == 0 or j + 1 == n:
            times.append(t + h)
            alphas.append(a)
            betas.append(b)
    return MeanFieldTrajectory(np.array(times), np.array(alphas), np.array(betas))


def periodic_alpha(reduced: ReducedParams, E: complex | None = None, K: int | None = None):
    """Closed-form periodic orbit of the modulated cavity amplitude.

    ``alpha(t) = exp(-i xi sin(nu t)) * sum_k c_k exp(i k nu t)`` with
    ``c_k = -iE J_k(xi) / (kappa/2 + i(Delta' + k nu))``.  Returns a
    vectorized callable of time.
    """
    E = complex(reduced.E if E is None else E)
    xi, nu = reduced.xi, reduced.nu
    if K is None:
        K = default_truncation(xi)
    k = np.arange(-K, K + 1)
    coeff = -1j * E * bessel_j_orders(K, xi) / (reduced.kappa / 2 + 1j * (reduced.delta_c_prime + k * nu))

    def alpha(t):
        t = np.asarray(t, dtype=float)
        phases = np.exp(1j * nu * np.multiply.outer(t, k))
        return np.exp(-1j * xi * np.sin(nu * t)) * (phases @ coeff)

    return alpha


def coupling_profile(reduced: ReducedParams, E: complex | None = None):
    """Time-dependent coupling ``G(t) = g*alpha(t)`` on the periodic orbit,
    for the optional comparison mode of the covariance integrator."""
    if reduced.g <= 0:
        raise ValueError("time-dependent coupling needs g > 0")
    alpha = periodic_alpha(reduced, E)
    return lambda t: reduced.g * alpha(t)
