"""Topology-correlation interval estimation.

Each feature point gets a complex value (peaks/valleys real, inflections
pure imaginary, with the inflection magnitude gamma a free parameter); the
piecewise-constant complex signal built from the nearest feature at each
instant is windowed around feature pairs and compared by a phase-invariant
squared inner product (the topology correlation q).  Pairs of same-kind
features that also match in raw waveform shape (ordinary correlation c)
and fall within the physiologic interval gate become interval estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import Waveform
from .features import FeatureKind, FeaturePoint


@dataclass(frozen=True)
class AssignmentTable:
    """Complex values per feature kind, parameterized by gamma.

    PK: -factor, VL: +factor, RDP: +j*factor, FDV: -j*factor,
    RDV: -j*gamma*factor, FDP: +j*gamma*factor.  `factor` (default 1)
    rotates or scales the whole table; correlations are invariant to it.
    Opposite feature kinds always map to opposite values.
    """

    gamma: float
    factor: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    def value(self, kind: FeatureKind) -> complex:
        base = {
            FeatureKind.PK: -1.0 + 0.0j,
            FeatureKind.VL: 1.0 + 0.0j,
            FeatureKind.RDP: 1.0j,
            FeatureKind.RDV: -1.0j * self.gamma,
            FeatureKind.FDP: 1.0j * self.gamma,
            FeatureKind.FDV: -1.0j,
        }[kind]
        return self.factor * base

    @property
    def mapping(self) -> dict[FeatureKind, complex]:
        return {kind: self.value(kind) for kind in FeatureKind}

    def scaled(self, factor: complex) -> "AssignmentTable":
        return AssignmentTable(self.gamma, self.factor * factor)


@dataclass(frozen=True)
class TopologyParams:
    """Window widths, thresholds, and the interval gate."""

    t_c: float = 0.5
    t_t: float = 0.5
    c_th: float = 0.7
    q_th: float = 0.5
    ibi_min: float = 0.4
    ibi_max: float = 1.2

    def __post_init__(self):
        if self.t_c <= 0 or self.t_t <= 0:
            raise ValueError("window widths must be > 0")
        if not -1.0 <= self.c_th <= 1.0:
            raise ValueError(f"c_th must lie in [-1, 1], got {self.c_th}")
        if not 0.0 <= self.q_th <= 1.0:
            raise ValueError(f"q_th must lie in [0, 1], got {self.q_th}")
        if not 0 < self.ibi_min < self.ibi_max:
            raise ValueError("need 0 < ibi_min < ibi_max")


@dataclass(frozen=True)
class TopologySeries:
    """Complex feature-value signal sampled on a waveform's grid."""

    values: np.ndarray
    fs: float
    t0: float = 0.0
    valid: tuple[int, int] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1:
            raise ValueError("values must be 1-D")
        valid = self.valid if self.valid is not None else (0, v.size)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", (int(valid[0]), int(valid[1])))


@dataclass(frozen=True)
class IbiEstimate:
    """One interval estimate from a gated, double-thresholded feature pair."""

    t_est: float
    ibi: float
    pair: tuple[int, int]
    kind: FeatureKind
    c_val: float
    q_val: float


def assign_signal(
    features: list[FeaturePoint], table: AssignmentTable, grid: np.ndarray
) -> np.ndarray:
    """Complex value of the nearest feature at each grid time.

    Piecewise constant with breakpoints at feature-time midpoints; a grid
    point exactly equidistant from two features takes the earlier one.
    """
    if not features:
        raise ValueError("feature list is empty")
    taus = np.asarray([f.tau for f in features])
    if np.any(np.diff(taus) < 0):
        raise ValueError("features must be sorted by time")
    values = np.asarray([table.value(f.kind) for f in features])
    boundaries = 0.5 * (taus[:-1] + taus[1:])
    idx = np.searchsorted(boundaries, np.asarray(grid, dtype=float), side="left")
    return values[idx]


def build_series(
    features: list[FeaturePoint], table: AssignmentTable, w: Waveform
) -> TopologySeries:
    """Sample the nearest-feature complex signal on `w`'s grid."""
    return TopologySeries(
        assign_signal(features, table, w.times()), fs=w.fs, t0=w.t0, valid=w.valid
    )


def _snap(tau: float, fs: float, t0: float) -> int:
    return int(round((tau - t0) * fs))


def _check_window(center: int, half: int, valid: tuple[int, int], tau: float):
    lo, hi = valid
    if center - half < lo or center + half >= hi:
        raise ValueError(
            f"window of +/-{half} samples around t={tau:.3f} s leaves the valid region"
        )


def _real_window(w: Waveform, tau: float, half: int) -> np.ndarray:
    center = _snap(tau, w.fs, w.t0)
    _check_window(center, half, w.valid, tau)
    win = w.samples[center - half : center + half + 1]
    return win - win.mean()


def _complex_window(s: TopologySeries, tau: float, half: int) -> np.ndarray:
    center = _snap(tau, s.fs, s.t0)
    _check_window(center, half, s.valid, tau)
    return s.values[center - half : center + half + 1]


def window_half_length(width: float, fs: float) -> int:
    """Samples per side: width/2 rounded to the grid."""
    return int(round(width * fs / 2.0))


def ordinary_corr(w: Waveform, tau_m: float, tau_n: float, t_c: float) -> float:
    """Cosine similarity of DC-removed waveform windows at two feature times.

    Symmetric in (tau_m, tau_n) and within [-1, 1].  Raises when a window
    leaves the valid region or has zero variance.
    """
    half = window_half_length(t_c, w.fs)
    vm = _real_window(w, tau_m, half)
    vn = _real_window(w, tau_n, half)
    nm = np.linalg.norm(vm)
    nn = np.linalg.norm(vn)
    if nm == 0.0 or nn == 0.0:
        raise ValueError("zero-variance window")
    return float(np.dot(vm, vn) / (nm * nn))


def topology_corr(s: TopologySeries, tau_m: float, tau_n: float, t_t: float) -> float:
    """Squared normalized inner product of complex feature-value windows.

    Lies in [0, 1] by Cauchy-Schwarz, is symmetric, and is invariant to a
    global phase rotation of the assignment table.  Raises when a window
    leaves the valid region or has zero norm (possible at gamma = 0).
    """
    half = window_half_length(t_t, s.fs)
    um = _complex_window(s, tau_m, half)
    un = _complex_window(s, tau_n, half)
    nm2 = float(np.real(np.vdot(um, um)))
    nn2 = float(np.real(np.vdot(un, un)))
    if nm2 == 0.0 or nn2 == 0.0:
        raise ValueError("zero-norm window")
    return float(abs(np.vdot(um, un)) ** 2 / (nm2 * nn2))


def estimate_ibis(
    w: Waveform,
    features: list[FeaturePoint],
    table: AssignmentTable,
    params: TopologyParams,
) -> list[IbiEstimate]:
    """Interval estimates from adjacent same-kind feature pairs.

    For each feature, later features of the same kind whose separation
    falls in [ibi_min, ibi_max] and which pass both correlation thresholds
    are candidates; the one maximizing c*q (earliest on ties) is emitted.
    Pairs whose windows leave the valid region or degenerate to zero
    variance/norm are skipped.  Output is sorted by estimate time, the
    midpoint of the pair.
    """
    if not features:
        return []
    series = build_series(features, table, w)
    taus = np.asarray([f.tau for f in features])
    by_kind: dict[FeatureKind, np.ndarray] = {}
    for kind in FeatureKind:
        by_kind[kind] = np.flatnonzero(np.asarray([f.kind is kind for f in features]))

    def pair_corrs(tau_n: float, tau_m: float):
        try:
            c = ordinary_corr(w, tau_m, tau_n, params.t_c)
            q = topology_corr(series, tau_m, tau_n, params.t_t)
        except ValueError:
            return None
        return c, q

    estimates: list[IbiEstimate] = []
    for n, feat in enumerate(features):
        group = by_kind[feat.kind]
        taus_k = taus[group]
        pos = np.searchsorted(taus_k, feat.tau + params.ibi_min, side="left")
        end = np.searchsorted(taus_k, feat.tau + params.ibi_max, side="right")
        best = None
        for j in range(pos, end):
            m = int(group[j])
            if m <= n:
                continue
            corrs = pair_corrs(feat.tau, taus[m])
            if corrs is None:
                continue
            c, q = corrs
            if c < params.c_th or q < params.q_th:
                continue
            score = c * q
            if best is None or score > best[0]:
                best = (score, m, c, q)
        if best is not None:
            _, m, c, q = best
            estimates.append(
                IbiEstimate(
                    t_est=0.5 * (feat.tau + taus[m]),
                    ibi=taus[m] - feat.tau,
                    pair=(n, m),
                    kind=feat.kind,
                    c_val=c,
                    q_val=q,
                )
            )
    estimates.sort(key=lambda e: (e.t_est, e.pair))
    return estimates
