"""Stability classification of static and modulated drifts.

Static systems (``xi = 0``) are tested with eigenvalues or the Routh-Hurwitz
conditions on the characteristic polynomial.  Modulated systems get Floquet
multipliers of one modulation period or a direct time-domain probe of the
covariance evolution.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .dynamics import (DivergenceError, StepPolicy, drift_batch, initial_covariance,
                       integrate_covariance, rk4_step_matrices)
from .model import ReducedParams
from .observables import phonon_number_raw


class Verdict(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of a stability test.

    ``margin`` is negative for stable systems: the largest eigenvalue real
    part, the largest Floquet modulus minus one, or the negated smallest
    Routh-Hurwitz quantity, depending on ``method``.
    """

    verdict: Verdict
    margin: float
    method: str
    detail: dict = field(default_factory=dict, compare=False)

    @property
    def stable(self) -> bool:
        return self.verdict is Verdict.STABLE


class RouthHurwitzError(ArithmeticError):
    """Routh array hit a (near-)zero pivot; the test is inconclusive."""


def _from_margin(margin: float, method: str, **detail) -> StabilityVerdict:
    verdict = Verdict.STABLE if margin < 0 else Verdict.UNSTABLE
    return StabilityVerdict(verdict, float(margin), method, detail)


def eigen_stability(A: np.ndarray) -> StabilityVerdict:
    """Stable iff every eigenvalue of the constant drift has negative real part."""
    eig = np.linalg.eigvals(np.asarray(A, dtype=float))
    return _from_margin(float(np.max(eig.real)), "eigenvalues", eigenvalues=eig)


def characteristic_polynomial(A: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients ``[1, a1, ..., an]`` by
    the Faddeev-LeVerrier recursion (no eigen-decomposition)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * eye
        coeffs.append(-np.trace(A @ M) / k)
    return np.array(coeffs)


def hurwitz_quantities(coeffs: Sequence[float]) -> np.ndarray:
    """First column of the Routh array for ``coeffs`` (highest power
    first).  All entries positive iff the polynomial is Hurwitz."""
    c = [float(x) for x in coeffs]
    n = len(c) - 1
    width = n // 2 + 1
    rows = [
        c[0::2] + [0.0] * (width - len(c[0::2])),
        c[1::2] + [0.0] * (width - len(c[1::2])),
    ]
    scale = max(abs(x) for x in c)
    for _ in range(n - 1):
        upper, lower = rows[-2], rows[-1]
        if abs(lower[0]) <= 1e-14 * scale:
            raise RouthHurwitzError("zero pivot in the Routh array (marginal or degenerate case)")
        new = [(lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0]
               for j in range(width - 1)] + [0.0]
        rows.append(new)
    return np.array([r[0] for r in rows])


def routh_hurwitz(A: np.ndarray) -> StabilityVerdict:
    """Routh-Hurwitz test on the characteristic polynomial of ``A``.

    For the quartic ``s^4 + a1 s^3 + a2 s^2 + a3 s + a4`` the Routh first
    column is ``1, a1, (a1 a2 - a3)/a1, a3 - a1^2 a4/(a1 a2 - a3), a4``,
    i.e. the Hurwitz determinant conditions in ratio form.
    """
    coeffs = characteristic_polynomial(A)
    column = hurwitz_quantities(coeffs)
    return _from_margin(-float(np.min(column[1:])), "routh-hurwitz",
                        coefficients=coeffs, routh_column=column)


def static_verdict(reduced: ReducedParams) -> StabilityVerdict:
    """Routh-Hurwitz on the static drift, falling back to eigenvalues on a
    zero pivot."""
    from .dynamics import build_drift

    A = build_drift(reduced.replace(xi=0.0))
    try:
        return routh_hurwitz(A)
    except RouthHurwitzError:
        return eigen_stability(A)


def bisect_boundary(f: Callable[[float], bool], lo: float, hi: float,
                    tol: float = 1e-4) -> float:
    """Locate the sign change of the predicate ``f`` (``f(lo) != f(hi)``)."""
    f_lo = f(lo)
    if f_lo == f(hi):
        raise ValueError("predicate does not change over the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def static_threshold(reduced: ReducedParams, G_max: float = 1.0, tol: float = 1e-4) -> float:
    """Coupling ``|G|`` at which the static system loses stability, by
    bisection of the Routh-Hurwitz verdict over ``[0, G_max]``."""
    return bisect_boundary(lambda G: static_verdict(reduced.replace(G=G, xi=0.0)).stable,
                           0.0, G_max, tol)


# -- modulated systems ------------------------------------------------------

def monodromy(reduced: ReducedParams, step_policy: StepPolicy | None = None,
              coupling=None) -> np.ndarray:
    """One-period fundamental matrix of ``du/dt = A(t) u`` from the identity,
    using the same RK4 step matrices as the covariance integrator."""
    policy = step_policy or StepPolicy()
    h, n = policy.resolve(reduced.nu)
    steps = rk4_step_matrices(lambda t: drift_batch(reduced, t, coupling), 0.0, h, n)
    Z = np.eye(4)
    for S in steps:
        Z = S @ Z
    if not np.all(np.isfinite(Z)):
        raise FloatingPointError("monodromy integration produced non-finite values")
    return Z


def floquet_multipliers(reduced: ReducedParams, step_policy: StepPolicy | None = None,
                        coupling=None) -> tuple[np.ndarray, StabilityVerdict]:
    """Floquet multipliers over the modulation period ``2*pi/nu``; stable iff
    every modulus is below one."""
    mult = np.linalg.eigvals(monodromy(reduced, step_policy, coupling))
    margin = float(np.max(np.abs(mult)) - 1.0)
    return mult, _from_margin(margin, "floquet", multipliers=mult)


def divergence_probe(reduced: ReducedParams, horizon: float | None = None,
                     step_policy: StepPolicy | None = None, *, rtol: float = 1e-6,
                     ceiling_factor: float = 1e12, lifetimes: float = 50.0) -> StabilityVerdict:
    """Time-domain stability check by integrating the covariance.

    Unstable when the divergence ceiling trips within ``horizon`` (default
    ``lifetimes`` cavity lifetimes ``1/kappa``); stable when the period
    averaged phonon number of the last two periods differ by less than
    ``rtol`` relative; undecided otherwise.
    """
    if horizon is None:
        horizon = lifetimes / reduced.kappa if reduced.kappa > 0 else 1e4
    V0 = initial_covariance(reduced.n_th)
    try:
        trace = integrate_covariance(reduced, V0, horizon, step_policy, stride=1,
                                     window_periods=0, ceiling_factor=ceiling_factor)
    except DivergenceError as exc:
        # margin: growth rate of the covariance amplitude implied by the blow-up
        final = np.abs(np.diag(exc.trace.covariances[-1]))
        ratio = float(np.max(final / np.diag(V0)))
        rate = math.log(ratio) / (2.0 * exc.time) if math.isfinite(ratio) else 1.0 / exc.time
        return StabilityVerdict(Verdict.UNSTABLE, rate, "divergence-probe",
                                {"divergence_time": exc.time, "horizon": horizon})
    n = phonon_number_raw(trace.period_means)
    if len(n) < 2:
        return StabilityVerdict(Verdict.UNDECIDED, math.nan, "divergence-probe",
                                {"horizon": horizon})
    change = abs(n[-1] - n[-2])
    scale = max(abs(n[-1]), abs(n[-2]), 1e-300)
    rel = change / scale if change else 0.0
    detail = {"horizon": horizon, "relative_change": rel, "final_phonons": float(n[-1])}
    if rel < rtol:
        return StabilityVerdict(Verdict.STABLE, rel - rtol, "divergence-probe", detail)
    return StabilityVerdict(Verdict.UNDECIDED, rel - rtol, "divergence-probe", detail)


def point_verdict(reduced: ReducedParams, step_policy: StepPolicy | None = None) -> StabilityVerdict:
    """Cheapest adequate test: Routh-Hurwitz for static, Floquet for modulated."""
    if reduced.xi == 0.0:
        return static_verdict(reduced)
    return floquet_multipliers(reduced, step_policy)[1]


# -- maps -------------------------------------------------------------------

@dataclass
class StabilityMap:
    """Verdict grid over ``values1 x values2``; ``verdicts[i][j]`` belongs to
    ``(values1[i], values2[j])``."""

    name1: str
    values1: np.ndarray
    name2: str
    values2: np.ndarray
    verdicts: list
    boundary: list = field(default_factory=list)

    def margins(self) -> np.ndarray:
        return np.array([[v.margin for v in row] for row in self.verdicts])

    def stable_mask(self) -> np.ndarray:
        return np.array([[v.verdict is Verdict.STABLE for v in row] for row in self.verdicts])


def _safe(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # recorded per point, the map carries on
        return StabilityVerdict(Verdict.UNDECIDED, math.nan, "error", {"error": repr(exc)})


class GridPoint:
    """Builds the parameters of a grid point by replacing two fields of a
    base parameter set (``"G"`` sets a real coupling)."""

    def __init__(self, base: ReducedParams, name1: str, name2: str):
        self.base, self.name1, self.name2 = base, name1, name2

    def __call__(self, a: float, b: float) -> ReducedParams:
        return self.base.replace(**{self.name1: a, self.name2: b})


class PointTask:
    """Picklable ``(a, b) -> StabilityVerdict`` so process pools can
    evaluate grid points; any failure becomes an undecided verdict."""

    def __init__(self, build: Callable, evaluate: Callable):
        self.build = build
        self.evaluate = evaluate

    def _run(self, a, b):
        params = self.build(a, b)
        verdict = self.evaluate(params)
        verdict.detail.setdefault("G_abs", abs(params.G))
        verdict.detail.setdefault("delta_c_prime", params.delta_c_prime)
        return verdict

    def __call__(self, point):
        return _safe(self._run, *point)


def stability_map(base, name1: str, values1, name2: str, values2,
                  step_policy: StepPolicy | None = None, *, boundary_tol: float = 1e-4,
                  evaluate: Callable | None = None, mapper=map) -> StabilityMap:
    """Classify every grid point and trace the stability boundary.

    ``base`` is either a :class:`ReducedParams` (points made by replacing
    ``name1``/``name2``) or a callable ``(a, b) -> ReducedParams``.
    ``evaluate(params) -> StabilityVerdict`` defaults to
    :func:`point_verdict`.  The boundary polyline is obtained per row of
    ``values1`` by bisecting, along ``name2``, every adjacent pair of grid
    points with opposite stable/unstable verdicts.  ``mapper`` may be any
    order-preserving ``map`` (e.g. a process pool's).
    """
    build = GridPoint(base, name1, name2) if isinstance(base, ReducedParams) else base
    if evaluate is None:
        evaluate = partial(point_verdict, step_policy=step_policy)
    task = PointTask(build, evaluate)
    values1 = np.asarray(values1, dtype=float)
    values2 = np.asarray(values2, dtype=float)
    points = [(float(a), float(b)) for a in values1 for b in values2]
    flat = list(mapper(task, points))
    n2 = len(values2)
    verdicts = [flat[i * n2:(i + 1) * n2] for i in range(len(values1))]

    boundary = []
    for i, a in enumerate(values1):
        row = verdicts[i]
        for j in range(n2 - 1):
            left, right = row[j], row[j + 1]
            if Verdict.UNDECIDED in (left.verdict, right.verdict) or left.verdict == right.verdict:
                continue
            lo, hi = sorted((values2[j], values2[j + 1]))
            try:
                b = bisect_boundary(lambda b: task((float(a), b)).stable, lo, hi, boundary_tol)
            except ValueError:
                continue
            boundary.append((float(a), float(b)))
    return StabilityMap(name1, values1, name2, values2, verdicts, boundary)
