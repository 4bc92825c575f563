"""Feature-point extraction from a band-limited displacement waveform.

Six feature kinds, classified by the signs of the first three derivatives
at zero crossings of the first or second derivative:

    PK  (peak)                      s' = 0, s'' < 0
    VL  (valley)                    s' = 0, s'' > 0
    RDP (rising derivative peak)    s' > 0, s'' = 0, s''' < 0
    RDV (rising derivative valley)  s' > 0, s'' = 0, s''' > 0
    FDP (falling derivative peak)   s' < 0, s'' = 0, s''' < 0
    FDV (falling derivative valley) s' < 0, s'' = 0, s''' > 0

Derivatives are second-order central differences; crossing times are
refined to sub-sample resolution by linear interpolation, which is what
sets the interval-estimate resolution after decimation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dsp import Waveform


class FeatureKind(enum.Enum):
    PK = "PK"
    VL = "VL"
    RDP = "RDP"
    RDV = "RDV"
    FDP = "FDP"
    FDV = "FDV"


@dataclass(frozen=True)
class FeaturePoint:
    """One extracted feature: sub-sample time, kind, nearest sample index."""

    tau: float
    kind: FeatureKind
    index: int


def derivatives(w: Waveform) -> tuple[Waveform, Waveform, Waveform]:
    """Central-difference estimates of the first three derivatives.

    All three are returned on the input grid with the valid range shrunk
    by two samples at each end (the widest stencil).
    """
    x = w.samples
    if x.size < 7:
        raise ValueError(f"need at least 7 samples, got {x.size}")
    h = 1.0 / w.fs
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    d3 = np.zeros_like(x)
    d1[1:-1] = (x[2:] - x[:-2]) / (2.0 * h)
    d2[1:-1] = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / h**2
    d3[2:-2] = (x[4:] - 2.0 * x[3:-1] + 2.0 * x[1:-3] - x[:-4]) / (2.0 * h**3)
    lo, hi = w.valid
    shrunk = (lo + 2, hi - 2)
    return (
        Waveform(d1, fs=w.fs, t0=w.t0, valid=shrunk),
        Waveform(d2, fs=w.fs, t0=w.t0, valid=shrunk),
        Waveform(d3, fs=w.fs, t0=w.t0, valid=shrunk),
    )


def _zero_crossings(d: np.ndarray, lo: int, hi: int, h: float, t0: float):
    """Sub-sample sign changes of `d` within [lo, hi), as (tau, direction).

    `direction` is +1 for an upward crossing, -1 for downward; it equals
    the sign of the crossed derivative's own slope at tau and is the
    noise-robust classifier downstream.  Samples that are exactly zero
    count as a crossing at the sample itself when their neighbours have
    opposite signs; tangencies (touch without sign change) are ignored.
    """
    crossings = []
    left = d[lo : hi - 1]
    right = d[lo + 1 : hi]
    change = left * right < 0.0
    for off in np.flatnonzero(change):
        i = lo + int(off)
        frac = d[i] / (d[i] - d[i + 1])
        crossings.append((t0 + (i + frac) * h, 1 if d[i] < 0.0 else -1))
    exact = np.flatnonzero(d[lo:hi] == 0.0) + lo
    for i in exact:
        if lo < i < hi - 1 and d[i - 1] * d[i + 1] < 0.0:
            crossings.append((t0 + i * h, 1 if d[i + 1] > 0.0 else -1))
    crossings.sort()
    return crossings


def _debounce(crossings: list[tuple], min_gap: float) -> list[tuple]:
    """Collapse crossing clusters closer than `min_gap`.

    Consecutive sign changes of a continuous function alternate direction,
    so an even-sized cluster is a zero-net blip (dropped entirely) while an
    odd-sized cluster nets one crossing, located at its median element and
    carrying the cluster's net direction (that of its first element).
    This keeps the crossing-direction sequence, hence peak/valley
    alternation, intact.
    """
    if not crossings:
        return []
    clusters: list[list[tuple]] = [[crossings[0]]]
    for item in crossings[1:]:
        if item[0] - clusters[-1][-1][0] < min_gap:
            clusters[-1].append(item)
        else:
            clusters.append([item])
    kept = []
    for group in clusters:
        if len(group) % 2 == 1:
            kept.append((group[len(group) // 2][0], group[0][1]))
    return kept


def _interp_at(d: np.ndarray, tau: float, t0: float, h: float) -> float:
    pos = (tau - t0) / h
    i = int(np.floor(pos))
    i = max(0, min(i, d.size - 2))
    frac = pos - i
    return float(d[i] * (1.0 - frac) + d[i + 1] * frac)


def extract_features(w: Waveform, min_sep: int = 2) -> list[FeaturePoint]:
    """Locate and classify all feature points in the valid region.

    PK/VL come from sign changes of the first derivative, the four
    inflection kinds from sign changes of the second.  The sign of the
    derivative one order up (s'' at a PK/VL, s''' at an inflection) is
    taken from the crossing direction -- the secant slope across the
    bracketing samples, a consistent and noise-robust estimate of that
    derivative at tau which also guarantees peak/valley alternation.
    Rising vs falling at an inflection uses s' linearly interpolated at
    tau; inflections with |s'| within 1e-12 of zero (relative to its
    overall scale) are discarded as unclassifiable ties.  `min_sep`
    (samples) de-bounces crossing clusters per derivative, suppressing
    noise-induced triples.
    """
    d1w, d2w, _ = derivatives(w)
    d1, d2 = d1w.samples, d2w.samples
    lo, hi = d1w.valid
    if hi - lo < 3:
        return []
    h = 1.0 / w.fs
    min_gap = min_sep * h

    scale1 = np.max(np.abs(d1[lo:hi])) or 1.0
    tol1 = 1e-12 * scale1

    out: list[FeaturePoint] = []

    for tau, direction in _debounce(_zero_crossings(d1, lo, hi, h, w.t0), min_gap):
        kind = FeatureKind.VL if direction > 0 else FeatureKind.PK
        out.append(FeaturePoint(tau, kind, int(round((tau - w.t0) * w.fs))))

    for tau, direction in _debounce(_zero_crossings(d2, lo, hi, h, w.t0), min_gap):
        slope = _interp_at(d1, tau, w.t0, h)
        if abs(slope) <= tol1:
            continue
        if slope > 0:
            kind = FeatureKind.RDV if direction > 0 else FeatureKind.RDP
        else:
            kind = FeatureKind.FDV if direction > 0 else FeatureKind.FDP
        out.append(FeaturePoint(tau, kind, int(round((tau - w.t0) * w.fs))))

    out.sort(key=lambda f: f.tau)
    return out
