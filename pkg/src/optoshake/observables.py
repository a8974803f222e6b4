"""Physical outputs of covariance matrices: phonon number, logarithmic
negativity, transient detection and period averaging."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CLAMP_TOL = 1e-9
RADICAND_TOL = 1e-10


class UnphysicalCovarianceError(ValueError):
    pass


class UnsettledSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class BlockDecomposition:
    """``V = [[A, C], [C^T, B]]`` with cavity block ``A`` and mechanical
    block ``B``."""

    A_block: np.ndarray
    B_block: np.ndarray
    C_block: np.ndarray

    @classmethod
    def of(cls, V: np.ndarray) -> "BlockDecomposition":
        V = np.asarray(V, dtype=float)
        return cls(V[..., :2, :2], V[..., 2:, 2:], V[..., :2, 2:])

    def assemble(self) -> np.ndarray:
        top = np.concatenate([self.A_block, self.C_block], axis=-1)
        bottom = np.concatenate([np.swapaxes(self.C_block, -1, -2), self.B_block], axis=-1)
        return np.concatenate([top, bottom], axis=-2)


def phonon_number_raw(V: np.ndarray):
    """``(<q^2> + <p^2> - 1)/2`` without clamping (batched)."""
    V = np.asarray(V, dtype=float)
    return 0.5 * (V[..., 2, 2] + V[..., 3, 3] - 1.0)


def phonon_number(V: np.ndarray):
    """Mean phonon number; round-off excursions below zero (within 1e-9)
    are clamped to 0."""
    n = phonon_number_raw(V)
    return np.where((n < 0) & (n >= -CLAMP_TOL), 0.0, n) if np.ndim(n) else (
        0.0 if -CLAMP_TOL <= n < 0 else float(n))


def eta_minus(V: np.ndarray):
    """Smallest symplectic eigenvalue of the partially transposed
    covariance, from the block invariants (batched).

    ``eta_-^2 = (Sigma - sqrt(Sigma^2 - 4 det V))/2`` is evaluated as
    ``2 det V / (Sigma + sqrt(...))`` to avoid cancellation when
    ``eta_- << eta_+``.
    """
    V = np.asarray(V, dtype=float)
    blocks = BlockDecomposition.of(V)
    det = np.linalg.det
    sigma = det(blocks.A_block) + det(blocks.B_block) - 2.0 * det(blocks.C_block)
    det_v = det(V)
    radicand = sigma * sigma - 4.0 * det_v
    scale = np.maximum(sigma * sigma, 1.0)
    if np.any(radicand < -RADICAND_TOL * scale):
        raise UnphysicalCovarianceError(f"negative radicand {np.min(radicand):.3e}")
    if np.any(det_v < -RADICAND_TOL * scale) or np.any(sigma < 0):
        raise UnphysicalCovarianceError("negative partial-transpose symplectic invariant")
    denom = sigma + np.sqrt(np.maximum(radicand, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        eta_sq = np.where(denom > 0, 2.0 * np.maximum(det_v, 0.0) / denom, 0.0)
    return np.sqrt(eta_sq)


def log_negativity(V: np.ndarray):
    """``max(0, -ln(2*eta_minus))``; positive exactly when the state is
    entangled."""
    eta = eta_minus(V)
    with np.errstate(divide="ignore"):
        en = -np.log(2.0 * eta)
    # det C >= 0 implies a positive partial transpose for any physical state;
    # short-circuit it so product states give exactly zero
    separable = np.linalg.det(BlockDecomposition.of(np.asarray(V, dtype=float)).C_block) >= 0
    en = np.where(separable, 0.0, np.maximum(en, 0.0))
    return en if np.ndim(en) else float(en)


# -- time-series helpers ----------------------------------------------------

def period_bins(series: ObservableSeries, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """Average the series over consecutive modulation periods starting at
    its first sample.  Returns ``(bin start times, bin means)``.  Periods
    without samples are skipped, and a trailing bin holding fewer samples
    than the one before it (an end point past the last whole period) is
    dropped."""
    period = 2.0 * math.pi / nu
    t = series.times
    idx = np.floor((t - t[0]) / period + 1e-9).astype(int)
    n_bins = int(idx[-1]) + 1
    sums = np.bincount(idx, weights=series.values, minlength=n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    keep = counts > 0
    filled = np.flatnonzero(keep)
    if len(filled) >= 2 and counts[filled[-1]] < counts[filled[-2]]:
        keep[filled[-1]] = False
    starts = t[0] + period * np.arange(n_bins)
    return starts[keep], sums[keep] / counts[keep]


@dataclass(frozen=True)
class Cutoff:
    t_ss: float
    settled: bool


def transient_cutoff(series: ObservableSeries, nu: float, *, rtol: float = 1e-4,
                     run: int = 5) -> Cutoff:
    """Earliest time after which consecutive period averages differ by less
    than ``rtol`` (relative) for ``run`` straight periods.

    Returns the end of the series with ``settled=False`` when that never
    happens.
    """
    starts, means = period_bins(series, nu)
    if len(means) >= 2:
        finite = np.isfinite(means)
        prev, cur = means[:-1], means[1:]
        scale = np.maximum(np.abs(prev), np.abs(cur))
        with np.errstate(invalid="ignore"):
            ok = (np.abs(cur - prev) <= rtol * scale) & finite[:-1] & finite[1:]
        # ok[i] compares period i with period i+1
        streak = 0
        for i in range(len(ok) - 1, -1, -1):
            if not ok[i]:
                break
            streak += 1
        if streak >= run:
            first = len(ok) - streak
            return Cutoff(float(starts[first]), True)
    return Cutoff(float(series.times[-1]), False)


def period_average(series: ObservableSeries, nu: float, window_periods: int = 10, *,
                   require_settled: bool = True) -> float:
    """Mean over the last ``window_periods`` whole modulation periods.

    Samples are taken to be left endpoints, so a uniformly sampled window of
    whole periods averages a ``2*pi/nu``-periodic signal exactly.  Raises
    :class:`UnsettledSeriesError` if ``require_settled`` and the series has
    not settled, or if the window is longer than the settled part.
    """
    period = 2.0 * math.pi / nu
    t = series.times
    t_end = t[-1]
    t_start = t_end - window_periods * period
    if t_start < t[0] - 1e-9 * period:
        raise UnsettledSeriesError("series shorter than the averaging window")
    if require_settled:
        cut = transient_cutoff(series, nu)
        if not cut.settled:
            raise UnsettledSeriesError("series has not settled")
        if t_start < cut.t_ss - 1e-9 * period:
            raise UnsettledSeriesError("averaging window reaches into the transient")
    sel = (t >= t_start - 1e-9 * period) & (t < t_end - 1e-9 * period)
    if not np.any(sel):
        raise UnsettledSeriesError("no samples in the averaging window")
    return float(np.mean(series.values[sel]))
