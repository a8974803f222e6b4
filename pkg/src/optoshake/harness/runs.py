"""Per-point computations behind the CLI subcommands.

Everything here is a pure function of a :class:`RunConfig` (or of reduced
parameters plus :class:`SimulationSettings`) and returns value objects, so
the task classes can be shipped to worker processes.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..dynamics import (DivergenceError, SimulationTrace, build_diffusion, build_drift,
                        initial_covariance, integrate_covariance, lyapunov_steady,
                        min_uncertainty_eigenvalue)
from ..meanfield import coupling_profile
from ..model import ReducedParams
from ..observables import (ObservableSeries, UnphysicalCovarianceError, log_negativity,
                           period_average, phonon_number, phonon_number_raw, transient_cutoff)
from ..sidebands import rwa_reduce
from ..stability import (StabilityVerdict, Verdict, divergence_probe, eigen_stability,
                         floquet_multipliers, routh_hurwitz, stability_map, static_verdict)
from .config import RunConfig, SimulationSettings, SweepSpec

NAN = math.nan


@contextmanager
def executor(parallel: int):
    """Order-preserving ``map``: the builtin for one worker, a process pool
    otherwise."""
    if parallel <= 1:
        yield map
    else:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            yield pool.map


# -- single point -----------------------------------------------------------

@dataclass
class PointResult:
    params: ReducedParams | None = None
    phonons_avg: float = NAN
    phonons_raw_avg: float = NAN
    log_negativity_avg: float = NAN
    settled: bool = False
    t_ss: float = NAN
    diverged: bool = False
    divergence_time: float = NAN
    verdict: str = Verdict.UNDECIDED.value
    margin: float = NAN
    min_uncertainty: float = NAN
    error: str = ""

    @property
    def unstable(self) -> bool:
        return self.diverged or self.verdict == Verdict.UNSTABLE.value

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def row(self) -> list:
        return [self.phonons_avg, self.phonons_raw_avg, self.log_negativity_avg, self.settled,
                self.t_ss, self.unstable, self.diverged, self.verdict, self.margin,
                self.min_uncertainty, self.error]


RESULT_COLUMNS = ["phonons_avg", "phonons_raw_avg", "log_negativity_avg", "settled", "t_ss",
                  "unstable", "diverged", "verdict", "margin", "min_uncertainty", "error"]


def _coupling(reduced: ReducedParams, settings: SimulationSettings):
    if settings.coupling == "time-dependent":
        return coupling_profile(reduced)
    return None


def point_stability(reduced: ReducedParams, settings: SimulationSettings,
                    coupling=None) -> StabilityVerdict:
    if coupling is None and not reduced.modulated:
        return static_verdict(reduced)
    return floquet_multipliers(reduced, settings.step_policy, coupling)[1]


def safe_log_negativity(V: np.ndarray) -> np.ndarray:
    try:
        return np.atleast_1d(log_negativity(V))
    except UnphysicalCovarianceError:
        return np.full(len(np.atleast_3d(V)), NAN)


def merged_series(trace: SimulationTrace) -> tuple[np.ndarray, np.ndarray]:
    """Stroboscopic samples before the dense window followed by the window."""
    if len(trace.dense_times):
        keep = trace.times < trace.dense_times[0] - 1e-12 * max(1.0, abs(trace.dense_times[0]))
        return (np.concatenate([trace.times[keep], trace.dense_times]),
                np.concatenate([trace.covariances[keep], trace.dense_covariances]))
    return trace.times, trace.covariances


def observe(trace: SimulationTrace, settings: SimulationSettings, result: PointResult) -> None:
    """Fill the averaged observables of a finished trace into ``result``."""
    nu = trace.params.nu
    per_period = ObservableSeries(trace.period_starts, phonon_number_raw(trace.period_means),
                                  "phonons")
    cut = transient_cutoff(per_period, nu)
    result.settled, result.t_ss = cut.settled, cut.t_ss
    window = trace.metadata["window_periods"]
    t = trace.dense_times
    V = trace.dense_covariances
    raw = ObservableSeries(t, phonon_number_raw(V))
    result.phonons_raw_avg = period_average(raw, nu, window, require_settled=False)
    result.phonons_avg = float(period_average(ObservableSeries(t, phonon_number(V)), nu, window,
                                              require_settled=False))
    result.log_negativity_avg = period_average(ObservableSeries(t, safe_log_negativity(V)), nu,
                                               window, require_settled=False)


def evaluate_point(reduced: ReducedParams, settings: SimulationSettings
                   ) -> tuple[PointResult, SimulationTrace]:
    """Stability verdict, covariance integration and averaged observables.

    Divergence is a result (``diverged``), not an exception.
    """
    result = PointResult(params=reduced)
    coupling = _coupling(reduced, settings)
    verdict = point_stability(reduced, settings, coupling)
    result.verdict, result.margin = verdict.verdict.value, verdict.margin
    V0 = initial_covariance(reduced.n_th)
    try:
        trace = integrate_covariance(reduced, V0, settings.t_max, settings.step_policy,
                                     stride=settings.output_stride,
                                     window_periods=settings.window_periods,
                                     ceiling_factor=settings.ceiling_factor, coupling=coupling)
    except DivergenceError as exc:
        trace = exc.trace
        result.diverged = True
        result.divergence_time = exc.time
    if not result.diverged:
        observe(trace, settings, result)
        result.min_uncertainty = float(np.min(min_uncertainty_eigenvalue(trace.all_covariances())))
    return result, trace


# -- sweeps -----------------------------------------------------------------

def grid(sweeps: tuple[SweepSpec, ...]) -> list[tuple[float, ...]]:
    """Cartesian product of the sweep values, first sweep slowest."""
    return [tuple(float(v) for v in combo)
            for combo in itertools.product(*(s.values() for s in sweeps))]


class SweepTask:
    """Picklable ``(index, values) -> PointResult``; failures are recorded in
    ``error`` rather than raised."""

    def __init__(self, cfg: RunConfig, names: tuple[str, ...]):
        self.cfg = cfg
        self.names = names

    def __call__(self, item) -> PointResult:
        _, values = item
        try:
            reduced = self.cfg.with_values(**dict(zip(self.names, values))).reduced_params()
        except Exception as exc:
            return PointResult(error=f"{type(exc).__name__}: {exc}")
        try:
            return evaluate_point(reduced, self.cfg.simulation)[0]
        except Exception as exc:
            return PointResult(params=reduced, error=f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: RunConfig, sweeps: tuple[SweepSpec, ...] | None = None
              ) -> tuple[list[str], list[tuple[float, ...]], list[PointResult]]:
    sweeps = sweeps or cfg.sweeps
    if not sweeps:
        raise ValueError("no sweep given")
    names = tuple(s.name for s in sweeps)
    points = grid(sweeps)
    with executor(cfg.parallel) as mapper:
        results = list(mapper(SweepTask(cfg, names), list(enumerate(points))))
    return list(names), points, results


# -- stability maps ---------------------------------------------------------

class ConfigPoint:
    """Picklable ``(a, b) -> ReducedParams`` through the config resolution
    (so physical sweeps pass through the mean-field calibration)."""

    def __init__(self, cfg: RunConfig, name1: str, name2: str):
        self.cfg, self.name1, self.name2 = cfg, name1, name2

    def __call__(self, a: float, b: float) -> ReducedParams:
        return self.cfg.with_values(**{self.name1: a, self.name2: b}).reduced_params()


class MapEvaluator:
    """Picklable verdict function for one of the map methods."""

    def __init__(self, method: str, settings: SimulationSettings):
        self.method = method
        self.settings = settings

    def __call__(self, params: ReducedParams) -> StabilityVerdict:
        method, settings = self.method, self.settings
        if method in ("eigen", "routh") and params.modulated:
            raise ValueError(f"method {method!r} applies to unmodulated points only")
        if method == "eigen":
            return eigen_stability(build_drift(params))
        if method == "routh":
            return routh_hurwitz(build_drift(params))
        if method == "floquet":
            return floquet_multipliers(params, settings.step_policy)[1]
        if method == "probe":
            return divergence_probe(params, step_policy=settings.step_policy,
                                    ceiling_factor=settings.ceiling_factor,
                                    lifetimes=settings.horizon_lifetimes)
        return point_stability(params, settings)


def run_stability_map(cfg: RunConfig, sweeps: tuple[SweepSpec, ...] | None = None,
                      boundary_tol: float = 1e-4):
    sweeps = sweeps or cfg.sweeps
    if len(sweeps) != 2 or sweeps[0].name == sweeps[1].name:
        raise ValueError("a stability map needs exactly two distinct sweeps")
    s1, s2 = sweeps
    build = ConfigPoint(cfg, s1.name, s2.name)
    with executor(cfg.parallel) as mapper:
        return stability_map(build, s1.name, s1.values(), s2.name, s2.values(),
                             cfg.simulation.step_policy, boundary_tol=boundary_tol,
                             evaluate=MapEvaluator(cfg.method, cfg.simulation), mapper=mapper)


# -- RWA comparison ---------------------------------------------------------

@dataclass
class RwaComparison:
    nu: float
    full: PointResult
    k0: int = 0
    bessel_weight: float = NAN
    G_eff_abs: float = NAN
    nu_over_max_coupling: float = NAN
    phonons_rwa: float = NAN
    log_negativity_rwa: float = NAN
    error: str = ""

    @staticmethod
    def _gap(full: float, rwa: float) -> float:
        if not (math.isfinite(full) and math.isfinite(rwa)):
            return NAN
        scale = max(abs(full), abs(rwa))
        return abs(full - rwa) / scale if scale else 0.0

    @property
    def phonons_gap(self) -> float:
        return self._gap(self.full.phonons_avg, self.phonons_rwa)

    @property
    def log_negativity_gap(self) -> float:
        return self._gap(self.full.log_negativity_avg, self.log_negativity_rwa)

    def row(self) -> list:
        f = self.full
        error = "; ".join(e for e in (f.error, self.error) if e)
        return [self.nu, self.k0, self.bessel_weight, self.G_eff_abs, self.nu_over_max_coupling,
                f.phonons_avg, self.phonons_rwa, self.phonons_gap, f.log_negativity_avg,
                self.log_negativity_rwa, self.log_negativity_gap, f.settled, f.unstable,
                f.diverged, error]


RWA_COLUMNS = ["nu", "k0", "bessel_weight", "G_eff_abs", "nu_over_max_coupling", "phonons_full",
               "phonons_rwa", "phonons_gap", "log_negativity_full", "log_negativity_rwa",
               "log_negativity_gap", "settled", "unstable", "diverged", "error"]


def rwa_steady(reduced: ReducedParams) -> tuple[object, np.ndarray]:
    """RWA model of ``reduced`` and its Lyapunov steady-state covariance."""
    model = rwa_reduce(reduced)
    p = model.params
    return model, lyapunov_steady(build_drift(p), build_diffusion(p))


class RwaTask:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    def __call__(self, nu: float) -> RwaComparison:
        try:
            reduced = self.cfg.with_values(nu=nu).reduced_params()
        except Exception as exc:
            return RwaComparison(nu, PointResult(error=f"{type(exc).__name__}: {exc}"))
        try:
            full = evaluate_point(reduced, self.cfg.simulation)[0]
        except Exception as exc:
            full = PointResult(params=reduced, error=f"{type(exc).__name__}: {exc}")
        out = RwaComparison(nu, full)
        try:
            model = rwa_reduce(reduced)
            out.k0, out.bessel_weight = model.k0, model.bessel_weight
            out.G_eff_abs = abs(model.G_eff)
            out.nu_over_max_coupling = model.validity.nu_over_max_coupling
            _, V = rwa_steady(reduced)
            out.phonons_rwa = float(phonon_number(V))
            out.log_negativity_rwa = float(log_negativity(V))
        except Exception as exc:
            out.error = f"{type(exc).__name__}: {exc}"
        return out


def run_rwa_compare(cfg: RunConfig, nus=None) -> list[RwaComparison]:
    nus = list(nus if nus is not None else (cfg.nus or (10.0, 20.0, 30.0, 50.0)))
    with executor(cfg.parallel) as mapper:
        return list(mapper(RwaTask(cfg), [float(v) for v in nus]))
