"""Linearized quadrature dynamics and covariance evolution.

Quadratures are ordered ``u = (x, y, q, p)`` (cavity, then mechanics).  The
covariance ``V_ij = <u_i u_j + u_j u_i>/2`` obeys ``dV/dt = A V + V A^T + D``
with the drift ``A(t) = A0 + cos(nu*t) * A1`` periodic in time.

Integration is classical fixed-step RK4.  Because the equation is linear
and affine, one RK4 step is an exact affine map of the state; the maps of a
whole modulation period are composed once and then applied period by period,
which gives the same numbers as stepping RK4 through every step but costs a
single small matrix-vector product per period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import ReducedParams

# upper-triangle packing of a symmetric 4x4 matrix into 10 entries
TRIU = np.triu_indices(4)
DIAG_SLOTS = np.array([0, 4, 7, 9])
N_PACKED = 10

SYMPLECTIC_FORM = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0, 0.0],
])


class DivergenceError(RuntimeError):
    """Covariance blew through the divergence ceiling.  ``trace`` holds what
    was integrated up to that point."""

    def __init__(self, message, time=None, trace=None):
        super().__init__(message)
        self.time = time
        self.trace = trace


class StepPolicyError(ValueError):
    pass


class NotHurwitzError(ValueError):
    pass


class IllConditionedError(ValueError):
    pass


def _unpack_matrix() -> np.ndarray:
    P = np.zeros((16, N_PACKED))
    for s, (i, j) in enumerate(zip(*TRIU)):
        P[4 * i + j, s] = 1.0
        P[4 * j + i, s] = 1.0
    return P


def _pack_matrix() -> np.ndarray:
    R = np.zeros((N_PACKED, 16))
    for s, (i, j) in enumerate(zip(*TRIU)):
        R[s, 4 * i + j] = 1.0
    return R


_UNPACK = _unpack_matrix()
_PACK = _pack_matrix()


def pack(V: np.ndarray) -> np.ndarray:
    """Upper triangle of (a stack of) symmetric 4x4 matrices."""
    V = np.asarray(V, dtype=float)
    return V[..., TRIU[0], TRIU[1]]


def unpack(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    V = np.zeros(y.shape[:-1] + (4, 4))
    V[..., TRIU[0], TRIU[1]] = y
    V[..., TRIU[1], TRIU[0]] = y
    return V


# -- model matrices ---------------------------------------------------------

def drift_parts(reduced: ReducedParams) -> tuple[np.ndarray, np.ndarray]:
    """``(A0, A1)`` with ``A(t) = A0 + cos(nu*t) * A1``."""
    k2 = reduced.kappa / 2.0
    g2 = reduced.gamma / 2.0
    d = reduced.delta_c_prime
    gr, gi = 2.0 * reduced.G_re, 2.0 * reduced.G_im
    A0 = np.array([
        [-k2, d, -gi, 0.0],
        [-d, -k2, gr, 0.0],
        [0.0, 0.0, -g2, 1.0],
        [gr, gi, -1.0, -g2],
    ])
    amp = reduced.xi * reduced.nu
    A1 = np.zeros((4, 4))
    A1[0, 1] = amp
    A1[1, 0] = -amp
    return A0, A1


def build_drift(reduced: ReducedParams, t: float = 0.0) -> np.ndarray:
    """Drift matrix at time ``t`` (units of ``1/omega_m``)."""
    A0, A1 = drift_parts(reduced)
    if reduced.xi == 0.0:
        return A0
    return A0 + math.cos(reduced.nu * t) * A1


def _coupling_drift(G: np.ndarray) -> np.ndarray:
    """Coupling entries of the drift for a batch of complex couplings."""
    G = np.asarray(G, dtype=complex)
    out = np.zeros(G.shape + (4, 4))
    out[..., 0, 2] = -2.0 * G.imag
    out[..., 1, 2] = 2.0 * G.real
    out[..., 3, 0] = 2.0 * G.real
    out[..., 3, 1] = 2.0 * G.imag
    return out


def drift_batch(reduced: ReducedParams, t: np.ndarray,
                coupling: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """Drift matrices at an array of times, shape ``t.shape + (4, 4)``.

    ``coupling``, when given, maps times to complex ``G(t)`` and replaces the
    constant coupling of ``reduced``.
    """
    t = np.asarray(t, dtype=float)
    A0, A1 = drift_parts(reduced)
    A = A0 + np.cos(reduced.nu * t)[..., None, None] * A1
    if coupling is not None:
        A = A - _coupling_drift(reduced.G) + _coupling_drift(coupling(t))
    return A


def build_diffusion(reduced: ReducedParams) -> np.ndarray:
    """``diag[kappa/2, kappa/2, gamma(2n_th+1)/2, gamma(2n_th+1)/2]``."""
    mech = reduced.gamma * (2.0 * reduced.n_th + 1.0) / 2.0
    return np.diag([reduced.kappa / 2.0, reduced.kappa / 2.0, mech, mech])


def initial_covariance(n_th: float) -> np.ndarray:
    """Cavity in vacuum, mechanics thermal with occupancy ``n_th``."""
    if n_th < 0:
        raise ValueError("n_th must be non-negative")
    m = n_th + 0.5
    return np.diag([0.5, 0.5, m, m])


def lyapunov_rhs(A: np.ndarray, V: np.ndarray, D: np.ndarray) -> np.ndarray:
    return A @ V + V @ A.T + D


def lyapunov_operator(A: np.ndarray) -> np.ndarray:
    """Matrix of ``V -> A V + V A^T`` acting on row-major ``vec(V)``
    (last two axes of ``A``; leading axes are batched)."""
    eye = np.eye(4)
    A = np.asarray(A)
    left = np.einsum("...ik,jl->...ijkl", A, eye)
    right = np.einsum("ik,...jl->...ijkl", eye, A)
    return (left + right).reshape(A.shape[:-2] + (16, 16))


def packed_generator(A: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Homogeneous generator ``B`` of the packed equation: ``z = (pack(V), 1)``
    evolves as ``dz/dt = B z``.  Batched over leading axes of ``A``."""
    L = _PACK @ lyapunov_operator(A) @ _UNPACK
    B = np.zeros(L.shape[:-2] + (N_PACKED + 1, N_PACKED + 1))
    B[..., :N_PACKED, :N_PACKED] = L
    B[..., :N_PACKED, N_PACKED] = pack(D)
    return B


# -- step policy and RK4 ----------------------------------------------------

@dataclass(frozen=True)
class StepPolicy:
    """Fixed RK4 step selection.

    The step divides the modulation period ``2*pi/nu`` into an integer
    number of steps, at least ``steps_per_period`` of them, and is also no
    longer than ``2*pi/mech_steps`` so the mechanical oscillation is
    resolved.  An explicit ``dt`` must satisfy both bounds and divide the
    period evenly.
    """

    steps_per_period: int = 512
    mech_steps: int = 64
    dt: Optional[float] = None

    def __post_init__(self):
        if self.steps_per_period < 1 or self.mech_steps < 1:
            raise StepPolicyError("step counts must be positive")

    def resolve(self, nu: float) -> tuple[float, int]:
        """Return ``(dt, steps per modulation period)``."""
        period = 2.0 * math.pi / nu
        needed = max(self.steps_per_period, math.ceil(self.mech_steps / nu - 1e-12))
        if self.dt is None:
            return period / needed, needed
        n = round(period / self.dt)
        if n < 1 or abs(n * self.dt - period) > 1e-9 * period:
            raise StepPolicyError(f"dt={self.dt} does not divide the modulation period {period}")
        if n < needed:
            raise StepPolicyError(
                f"dt={self.dt} too coarse: need at least {needed} steps per period")
        return period / n, n

    def halved(self) -> "StepPolicy":
        return StepPolicy(2 * self.steps_per_period, 2 * self.mech_steps,
                          None if self.dt is None else self.dt / 2)

    def as_dict(self) -> dict:
        return {"steps_per_period": self.steps_per_period, "mech_steps": self.mech_steps,
                "dt": self.dt}


def rk4_step_matrices(generator: Callable[[np.ndarray], np.ndarray], t0: float, h: float,
                      n: int) -> np.ndarray:
    """RK4 propagators of the linear system ``dz/dt = B(t) z``.

    ``generator`` maps an array of times to the stacked matrices ``B(t)``.
    Returns ``S`` of shape ``(n, d, d)`` with ``z_{j+1} = S[j] z_j`` for the
    step starting at ``t0 + j*h``.
    """
    starts = t0 + h * np.arange(n)
    B0 = generator(starts)
    Bh = generator(starts + 0.5 * h)
    B1 = generator(starts + h)
    eye = np.eye(B0.shape[-1])
    k1 = B0
    k2 = Bh @ (eye + 0.5 * h * k1)
    k3 = Bh @ (eye + 0.5 * h * k2)
    k4 = B1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def compose(steps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Product of step matrices and the mean of the partial products.

    Returns ``(M, W)`` with ``M = S[n-1] ... S[0]`` and
    ``W = mean_j (S[j-1] ... S[0])`` (``j = 0..n-1``); ``W z`` is the
    average of the state over the sample points of one period.
    """
    d = steps.shape[-1]
    Z = np.eye(d)
    W = np.zeros((d, d))
    for S in steps:
        W += Z
        Z = S @ Z
    return Z, W / len(steps)


# -- covariance integration -------------------------------------------------

@dataclass
class SimulationTrace:
    """Covariance trace of one run.

    ``times``/``covariances`` are stroboscopic samples at modulation-period
    boundaries (every ``stride`` periods).  ``period_starts``/``period_means``
    hold the average of ``V`` over every integrated period.  The dense
    window covers the last periods at every RK4 step.
    """

    times: np.ndarray
    covariances: np.ndarray
    period_starts: np.ndarray
    period_means: np.ndarray
    dense_times: np.ndarray
    dense_covariances: np.ndarray
    params: ReducedParams
    metadata: dict = field(default_factory=dict)
    diverged: bool = False

    @property
    def dt(self) -> float:
        return self.metadata["dt"]

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.params.nu

    @property
    def final(self) -> np.ndarray:
        if len(self.dense_covariances):
            return self.dense_covariances[-1]
        return self.covariances[-1]

    def all_covariances(self) -> np.ndarray:
        return np.concatenate([self.covariances, self.dense_covariances])


def _resolve_span(t_span) -> tuple[float, float]:
    if np.ndim(t_span) == 0:
        t0, t1 = 0.0, float(t_span)
    else:
        t0, t1 = (float(v) for v in t_span)
    if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
        raise ValueError(f"invalid time span {t_span!r}")
    return t0, t1


def period_propagators(reduced: ReducedParams, policy: StepPolicy, t0: float = 0.0,
                       coupling=None) -> tuple[np.ndarray, float]:
    """Packed-state RK4 step matrices over one modulation period."""
    h, n = policy.resolve(reduced.nu)
    D = build_diffusion(reduced)

    def generator(t):
        return packed_generator(drift_batch(reduced, t, coupling), D)

    return rk4_step_matrices(generator, t0, h, n), h


def integrate_covariance(reduced: ReducedParams, V0: np.ndarray, t_span,
                         step_policy: StepPolicy | None = None, *, stride: int = 1,
                         window_periods: int = 10, ceiling_factor: float = 1e12,
                         coupling=None) -> SimulationTrace:
    """Integrate ``dV/dt = A(t) V + V A(t)^T + D`` with fixed-step RK4.

    The span is rounded up to a whole number of modulation periods
    ``2*pi/nu``.  Raises :class:`DivergenceError` (carrying the partial
    trace) once any diagonal entry exceeds ``ceiling_factor`` times its
    initial value.
    """
    policy = step_policy or StepPolicy()
    t0, t1 = _resolve_span(t_span)
    V0 = np.asarray(V0, dtype=float)
    if V0.shape != (4, 4):
        raise ValueError("V0 must be 4x4")
    V0 = 0.5 * (V0 + V0.T)
    if stride < 1 or window_periods < 0:
        raise ValueError("stride must be >= 1 and window_periods >= 0")

    period = 2.0 * math.pi / reduced.nu
    n_periods = max(1, math.ceil((t1 - t0) / period - 1e-9))
    window = min(window_periods, n_periods)
    steps, h = period_propagators(reduced, policy, t0, coupling)
    n_steps = len(steps)
    M, W = compose(steps)
    M10, c10 = M[:N_PACKED, :N_PACKED], M[:N_PACKED, N_PACKED]
    W10, w10 = W[:N_PACKED, :N_PACKED], W[:N_PACKED, N_PACKED]

    ceiling = ceiling_factor * np.maximum(np.diag(V0), 0.5)
    y = pack(V0)
    metadata = {
        "method": "rk4",
        "dt": h,
        "steps_per_period": n_steps,
        "n_periods": n_periods,
        "t_start": t0,
        "t_end": t0 + n_periods * period,
        "stride": stride,
        "window_periods": window,
        "ceiling_factor": ceiling_factor,
        "step_policy": policy.as_dict(),
        "time_dependent_coupling": coupling is not None,
    }

    times = [t0]
    samples = [y]
    means = np.empty((n_periods, N_PACKED))
    bulk = n_periods - window
    diverged_at = None
    for i in range(bulk):
        means[i] = W10 @ y + w10
        y = M10 @ y + c10
        if not np.all(np.abs(y[DIAG_SLOTS]) < ceiling):
            diverged_at = i + 1
            times.append(t0 + (i + 1) * period)
            samples.append(y)
            break
        if (i + 1) % stride == 0:
            times.append(t0 + (i + 1) * period)
            samples.append(y)

    dense_t = []
    dense_y = []
    if diverged_at is None:
        for i in range(bulk, n_periods):
            start = t0 + i * period
            acc = np.zeros(N_PACKED)
            for j in range(n_steps):
                dense_t.append(start + j * h)
                dense_y.append(y)
                acc += y
                S = steps[j]
                y = S[:N_PACKED, :N_PACKED] @ y + S[:N_PACKED, N_PACKED]
            means[i] = acc / n_steps
            if not np.all(np.abs(y[DIAG_SLOTS]) < ceiling):
                diverged_at = i + 1
                times.append(t0 + (i + 1) * period)
                samples.append(y)
                break
            if (i + 1) % stride == 0:
                times.append(t0 + (i + 1) * period)
                samples.append(y)
        t_last = t0 + (diverged_at or n_periods) * period
        if window:
            dense_t.append(t_last)
            dense_y.append(y)
        if times[-1] < t_last:
            times.append(t_last)
            samples.append(y)

    n_done = diverged_at if diverged_at is not None else n_periods
    trace = SimulationTrace(
        times=np.array(times),
        covariances=unpack(np.array(samples)),
        period_starts=t0 + period * np.arange(n_done),
        period_means=unpack(means[:n_done]),
        dense_times=np.array(dense_t),
        dense_covariances=unpack(np.array(dense_y).reshape(-1, N_PACKED)),
        params=reduced,
        metadata=metadata,
        diverged=diverged_at is not None,
    )
    if diverged_at is not None:
        t_div = t0 + diverged_at * period
        trace.metadata["divergence_time"] = t_div
        raise DivergenceError(f"covariance diverged at t={t_div:.6g}", time=t_div, trace=trace)
    return trace


def integrate_covariance_direct(reduced: ReducedParams, V0: np.ndarray, t_end: float,
                                step_policy: StepPolicy | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Plain step-by-step RK4 on the full 4x4 matrix, symmetrized after each
    step.  Slow; kept as an independent route for short spans."""
    policy = step_policy or StepPolicy()
    h, n_per = policy.resolve(reduced.nu)
    n = round(t_end / h)
    D = build_diffusion(reduced)
    V = np.array(V0, dtype=float)
    out = [V.copy()]

    def f(t, V):
        return lyapunov_rhs(build_drift(reduced, t), V, D)

    for j in range(n):
        t = j * h
        k1 = f(t, V)
        k2 = f(t + h / 2, V + h / 2 * k1)
        k3 = f(t + h / 2, V + h / 2 * k2)
        k4 = f(t + h, V + h * k3)
        V = V + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        V = 0.5 * (V + V.T)
        out.append(V.copy())
    return h * np.arange(n + 1), np.array(out)


# -- algebraic steady state -------------------------------------------------

def lyapunov_steady(A: np.ndarray, D: np.ndarray, *, max_condition: float = 1e12) -> np.ndarray:
    """Solve ``A V + V A^T + D = 0`` for a Hurwitz-stable constant drift.

    The equation is vectorized into a 16x16 linear system.  Raises
    :class:`NotHurwitzError` for drifts with an eigenvalue in the closed
    right half plane and :class:`IllConditionedError` when the vectorized
    operator has condition number above ``max_condition``.
    """
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    margin = float(np.max(np.linalg.eigvals(A).real))
    if margin >= 0.0:
        raise NotHurwitzError(f"drift is not Hurwitz (max Re eigenvalue {margin:.3e})")
    L = lyapunov_operator(A)
    cond = np.linalg.cond(L)
    if cond > max_condition:
        raise IllConditionedError(f"Lyapunov operator condition number {cond:.3e}")
    V = np.linalg.solve(L, -D.reshape(16)).reshape(4, 4)
    return 0.5 * (V + V.T)


def lyapunov_residual(A: np.ndarray, V: np.ndarray, D: np.ndarray) -> float:
    """``||A V + V A^T + D|| / ||D||`` (Frobenius)."""
    scale = np.linalg.norm(D) or 1.0
    return float(np.linalg.norm(lyapunov_rhs(A, V, D)) / scale)


# -- physicality ------------------------------------------------------------

def min_uncertainty_eigenvalue(V: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of ``V + (i/2) Omega`` (batched)."""
    H = np.asarray(V, dtype=complex) + 0.5j * SYMPLECTIC_FORM
    return np.linalg.eigvalsh(H)[..., 0]


def is_physical(V: np.ndarray, tol: float = 1e-6) -> bool:
    V = np.asarray(V, dtype=float)
    return bool(np.all(min_uncertainty_eigenvalue(V) >= -tol))
