"""Evaluation against reference beats: RMS error and time coverage rate.

The reference interval series is piecewise constant over half-open
inter-beat intervals; each estimate is matched by evaluating it at the
estimate timestamp.  Estimates falling outside the reference span are
excluded from the RMS, never silently zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import IbiEstimate


@dataclass(frozen=True)
class ReferenceBeats:
    """Strictly increasing beat instants, typically from a synchronized ECG."""

    r_times: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r_times, dtype=float)
        if r.ndim != 1:
            raise ValueError("r_times must be 1-D")
        if r.size >= 2 and np.any(np.diff(r) <= 0):
            raise ValueError("r_times must be strictly increasing")
        if not np.all(np.isfinite(r)):
            raise ValueError("r_times must be finite")
        object.__setattr__(self, "r_times", r)

    def __len__(self) -> int:
        return self.r_times.size


@dataclass(frozen=True)
class EvalReport:
    """Accuracy summary for one record.

    rms_ms is None when no estimate could be matched to the reference
    (an explicit undefined marker, never reported as 0).
    """

    rms_ms: float | None
    tcr: float
    n_estimates: int
    residuals_ms: np.ndarray
    excluded: int

    def to_json_dict(self) -> dict:
        return {
            "rms_ms": self.rms_ms,
            "tcr": self.tcr,
            "n_estimates": self.n_estimates,
            "excluded": self.excluded,
        }


def reference_ibi_at(ref: ReferenceBeats, t: float) -> float | None:
    """Reference interval of the half-open inter-beat interval containing t.

    Returns None outside [first beat, last beat).
    """
    r = ref.r_times
    if r.size < 2:
        return None
    k = int(np.searchsorted(r, t, side="right")) - 1
    if k < 0 or k >= r.size - 1:
        return None
    return float(r[k + 1] - r[k])


def rms_error(
    estimates: list[IbiEstimate], ref: ReferenceBeats
) -> tuple[float | None, np.ndarray]:
    """RMS of per-estimate residuals in milliseconds.

    residual_i = 1000 * (estimate interval - reference interval at the
    estimate time).  Estimates with no matchable reference are left out of
    both the residuals and the RMS; with nothing matchable the RMS is None.
    """
    residuals = []
    for est in estimates:
        ref_ibi = reference_ibi_at(ref, est.t_est)
        if ref_ibi is None:
            continue
        residuals.append(1000.0 * (est.ibi - ref_ibi))
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        return None, residuals
    return float(np.sqrt(np.mean(residuals**2))), residuals


def tcr(
    estimates: list[IbiEstimate],
    ref: ReferenceBeats,
    eps_ms: float = 50.0,
    dt_tcr: float = 1.0,
    t_all: float | None = None,
) -> float:
    """Fraction of dt_tcr-long intervals holding an accurate estimate.

    [0, t_all) is split into consecutive intervals of length dt_tcr (a
    final partial interval is dropped from both counts); an interval
    counts when it contains at least one estimate whose absolute residual
    is below eps_ms.  t_all defaults to the last reference beat time.
    """
    if dt_tcr <= 0:
        raise ValueError("dt_tcr must be > 0")
    if t_all is None:
        if len(ref) == 0:
            raise ValueError("t_all is required when the reference is empty")
        t_all = float(ref.r_times[-1])
    if t_all <= 0:
        raise ValueError("t_all must be > 0")
    n_intervals = int(np.floor(t_all / dt_tcr))
    if n_intervals == 0:
        return 0.0
    hit = np.zeros(n_intervals, dtype=bool)
    for est in estimates:
        ref_ibi = reference_ibi_at(ref, est.t_est)
        if ref_ibi is None:
            continue
        if abs(1000.0 * (est.ibi - ref_ibi)) >= eps_ms:
            continue
        k = int(np.floor(est.t_est / dt_tcr))
        if 0 <= k < n_intervals:
            hit[k] = True
    return float(np.count_nonzero(hit)) / n_intervals


def evaluate(
    estimates: list[IbiEstimate],
    ref: ReferenceBeats,
    eps_ms: float = 50.0,
    dt_tcr: float = 1.0,
    t_all: float | None = None,
) -> EvalReport:
    """Bundle RMS error and TCR into one report."""
    rms, residuals = rms_error(estimates, ref)
    coverage = tcr(estimates, ref, eps_ms=eps_ms, dt_tcr=dt_tcr, t_all=t_all)
    return EvalReport(
        rms_ms=rms,
        tcr=coverage,
        n_estimates=len(estimates),
        residuals_ms=residuals,
        excluded=len(estimates) - residuals.size,
    )
