"""Jacobi-Anger sideband decomposition and the rotating-wave reduced model.

Shaking the cavity frequency as ``xi*nu*cos(nu*t)`` splits each
optomechanical interaction into discrete sidebands ``k`` weighted by the
Bessel function ``J_k(xi)`` and detuned by ``k*nu``.  For ``nu`` much larger
than the mechanical frequency only the most resonant sideband survives and
the model is a static one with coupling ``G*J_k0(xi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ReducedParams

MAX_ARG = 50.0
MAX_ORDER = 200
COMPLETENESS_TOL = 1e-10


class BesselRangeError(ValueError):
    pass


class TruncationError(ValueError):
    """Requested sideband truncation leaves too much Bessel weight out."""

    def __init__(self, K: int, residual: float, minimal_K: int):
        self.K = K
        self.residual = residual
        self.minimal_K = minimal_K
        super().__init__(
            f"K={K} leaves residual weight {residual:.3e} (> {COMPLETENESS_TOL:g}); "
            f"use K >= {minimal_K}"
        )


def _series(k: int, x: float) -> float:
    # J_k(x) = sum_m (-1)^m (x/2)^(2m+k) / (m! (m+k)!),  k >= 0
    half = 0.5 * x
    log_lead = k * math.log(half) - math.lgamma(k + 1)
    if log_lead < -745.0:
        return 0.0
    term = math.exp(log_lead)
    total = term
    q = -half * half
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + k))
        total += term
        if abs(term) <= 1e-17 * abs(total) or term == 0.0:
            return total


def _miller(x: float, kmax: int) -> np.ndarray:
    """J_0..J_kmax at x > 0 by downward recurrence, normalized with
    J_0 + 2*sum J_2j = 1."""
    start = max(kmax, int(x)) + 20 + int(math.sqrt(40.0 * max(kmax, x)))
    start += start % 2
    j = np.zeros(start + 2)
    j[start] = 1e-300
    for n in range(start, 0, -1):
        j[n - 1] = (2.0 * n / x) * j[n] - j[n + 1]
        if abs(j[n - 1]) > 1e250:
            j[n - 1:] *= 1e-250
    norm = j[0] + 2.0 * j[2:start + 1:2].sum()
    return j[:kmax + 1] / norm


def _use_series(k: int, x: float) -> bool:
    # alternating series is cancellation-free when its largest term is O(1)
    return x <= 1.0 or 0.25 * x * x <= k + 1


def bessel_j(k: int, xi: float) -> float:
    """Bessel function of the first kind ``J_k(xi)`` for integer order.

    Supported range ``|xi| <= 50`` and ``|k| <= 200``; absolute accuracy
    around 1e-15 throughout.
    """
    k = int(k)
    xi = float(xi)
    if not math.isfinite(xi) or abs(xi) > MAX_ARG:
        raise BesselRangeError(f"|xi| must be <= {MAX_ARG}, got {xi}")
    if abs(k) > MAX_ORDER:
        raise BesselRangeError(f"|k| must be <= {MAX_ORDER}, got {k}")
    sign = 1.0
    if k < 0:
        k = -k
        sign = -1.0 if k % 2 else 1.0
    if xi < 0:
        xi = -xi
        if k % 2:
            sign = -sign
    if xi == 0.0:
        return sign * (1.0 if k == 0 else 0.0)
    if _use_series(k, xi):
        return sign * _series(k, xi)
    return sign * float(_miller(xi, k)[k])


def bessel_j_orders(K: int, xi: float) -> np.ndarray:
    """``J_k(xi)`` for ``k = -K..K`` in one downward sweep."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if abs(xi) > MAX_ARG or K > MAX_ORDER:
        raise BesselRangeError(f"out of supported range (xi={xi}, K={K})")
    ks = np.arange(-K, K + 1)
    if xi == 0.0:
        return (ks == 0).astype(float)
    x = abs(xi)
    pos = _miller(x, K) if x > 1.0 else np.array([_series(k, x) for k in range(K + 1)])
    # the series branch is more accurate for orders far above the argument
    for k in range(K + 1):
        if x > 1.0 and _use_series(k, x):
            pos[k] = _series(k, x)
    if xi < 0:
        pos = pos * (-1.0) ** np.arange(K + 1)
    neg = pos[1:][::-1] * (-1.0) ** np.arange(K, 0, -1)
    return np.concatenate([neg, pos])


def default_truncation(xi: float) -> int:
    return int(math.ceil(abs(xi) + 10.0 * abs(xi) ** (1.0 / 3.0) + 10.0))


def residual_weight(xi: float, K: int) -> float:
    """``1 - sum_{|k|<=K} J_k(xi)^2``."""
    w = bessel_j_orders(K, xi)
    return float(1.0 - np.dot(w, w))


def minimal_truncation(xi: float) -> int:
    K = 0
    while residual_weight(xi, K) >= COMPLETENESS_TOL:
        K += 1
    return K


@dataclass(frozen=True)
class SidebandTable:
    """Per-sideband Bessel weights and beam-splitter / two-mode-squeezing
    detunings over ``k = -K..K``."""

    k: np.ndarray
    weight: np.ndarray
    bs_detuning: np.ndarray
    tms_detuning: np.ndarray

    def __len__(self):
        return len(self.k)

    def rows(self):
        return zip(self.k.tolist(), self.weight.tolist(), self.bs_detuning.tolist(),
                   self.tms_detuning.tolist())


def sideband_table(reduced: ReducedParams, K: int | None = None) -> SidebandTable:
    """Sideband table truncated at ``|k| <= K`` (default from the Bessel decay
    envelope).  Raises :class:`TruncationError` if the omitted weight
    exceeds 1e-10."""
    xi = reduced.xi
    if K is None:
        K = default_truncation(xi)
    if K < 0:
        raise ValueError("K must be non-negative")
    weight = bessel_j_orders(K, xi)
    residual = float(1.0 - np.dot(weight, weight))
    if residual >= COMPLETENESS_TOL:
        raise TruncationError(K, residual, minimal_truncation(xi))
    k = np.arange(-K, K + 1)
    shift = reduced.delta_c_prime + k * reduced.nu
    return SidebandTable(k=k, weight=weight, bs_detuning=shift - 1.0, tms_detuning=shift + 1.0)


def nearest_resonant_index(delta_c_prime: float, nu: float) -> int:
    """Sideband index minimizing the beam-splitter detuning
    ``|delta_c_prime - 1 + k*nu|``; ties go to smaller ``|k|``, then to
    negative ``k``."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    x = (delta_c_prime - 1.0) / nu
    candidates = {math.floor(-x), math.ceil(-x)}
    return min(candidates, key=lambda k: (abs(delta_c_prime - 1.0 + k * nu), abs(k), k))


@dataclass(frozen=True)
class RwaValidity:
    nu_over_omega_m: float
    nu_over_max_coupling: float


@dataclass(frozen=True)
class RwaModel:
    """Static model with the modulation removed and the coupling replaced
    by ``G*J_k0(xi)``.  ``params.nu`` is kept only to fix the integration
    chunking; it has no physical effect since ``params.xi == 0``."""

    params: ReducedParams
    k0: int
    bessel_weight: float
    validity: RwaValidity

    @property
    def G_eff(self) -> complex:
        return self.params.G


def rwa_reduce(reduced: ReducedParams) -> RwaModel:
    """Keep only the nearest resonant sideband.

    Validity is reported, not enforced: the ratios ``nu/omega_m`` and
    ``nu/max_k |G J_k(xi)|`` should both be large.
    """
    G = reduced.G
    if reduced.xi == 0.0:
        validity = RwaValidity(reduced.nu, math.inf)
        return RwaModel(reduced, 0, 1.0, validity)
    k0 = nearest_resonant_index(reduced.delta_c_prime, reduced.nu)
    w = bessel_j(k0, reduced.xi)
    K = max(default_truncation(reduced.xi), abs(k0))
    strongest = abs(G) * float(np.max(np.abs(bessel_j_orders(K, reduced.xi))))
    validity = RwaValidity(
        nu_over_omega_m=reduced.nu,
        nu_over_max_coupling=reduced.nu / strongest if strongest > 0 else math.inf,
    )
    static = reduced.replace(G=G * w, xi=0.0)
    return RwaModel(static, k0, w, validity)
