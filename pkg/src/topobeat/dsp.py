"""Raw radar IQ to band-limited displacement.

Chain: DC-offset removal (mean subtraction), four-quadrant phase
extraction, unwrapping, decimation to a working rate, and a linear-phase
high-pass FIR with compensated group delay.  The pipeline operates on
phase radians; the constant scale to metric displacement affects neither
feature times nor normalized correlations, so it is never applied.

Filtering invalidates (taps-1)/2 samples at each end of a record; every
Waveform carries a half-open `valid` index range so downstream feature
extraction can skip those edges.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve, firwin, kaiserord


@dataclass(frozen=True)
class IQRecord:
    """Complex baseband radar samples as parallel I/Q arrays."""

    i_samples: np.ndarray
    q_samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        i = np.asarray(self.i_samples, dtype=float)
        q = np.asarray(self.q_samples, dtype=float)
        if i.ndim != 1 or q.ndim != 1 or i.size != q.size:
            raise ValueError("i_samples and q_samples must be 1-D and equal length")
        if not self.fs > 0:
            raise ValueError(f"fs must be > 0, got {self.fs}")
        object.__setattr__(self, "i_samples", i)
        object.__setattr__(self, "q_samples", q)

    def __len__(self) -> int:
        return self.i_samples.size

    @property
    def complex(self) -> np.ndarray:
        return self.i_samples + 1j * self.q_samples

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs

    @property
    def duration(self) -> float:
        return len(self) / self.fs


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real series with a valid (non-edge) index range."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0
    valid: tuple[int, int] | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("samples must be 1-D")
        if not self.fs > 0:
            raise ValueError(f"fs must be > 0, got {self.fs}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        valid = self.valid if self.valid is not None else (0, x.size)
        lo, hi = int(valid[0]), int(valid[1])
        lo = max(lo, 0)
        hi = min(hi, x.size)
        if lo > hi:
            lo = hi
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "valid", (lo, hi))

    def __len__(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    @property
    def valid_time_range(self) -> tuple[float, float]:
        """Times of the first and last valid sample (inclusive)."""
        lo, hi = self.valid
        if hi <= lo:
            raise ValueError("waveform has no valid samples")
        return self.t0 + lo / self.fs, self.t0 + (hi - 1) / self.fs


@dataclass(frozen=True)
class FirSpec:
    """High-pass FIR design parameters.

    `cutoff_hz` is the half-amplitude frequency; the transition band of
    width `transition_hz` is centred on it.  `taps`, when given, is an odd
    tap budget; left as None the count is derived from the attenuation and
    transition width.
    """

    kind: str = "highpass"
    cutoff_hz: float = 0.5
    stopband_atten_db: float = 60.0
    transition_hz: float = 0.4
    taps: int | None = None

    def __post_init__(self):
        if self.kind != "highpass":
            raise ValueError(f"unsupported filter kind {self.kind!r}")
        if self.stopband_atten_db < 60.0:
            raise ValueError("stopband_atten_db must be >= 60")
        if self.cutoff_hz <= 0 or self.transition_hz <= 0:
            raise ValueError("cutoff_hz and transition_hz must be > 0")
        if self.taps is not None and self.taps % 2 == 0:
            raise ValueError("tap budget must be odd")


def remove_dc(iq: IQRecord) -> IQRecord:
    """Subtract the time average of the IQ samples."""
    if len(iq) == 0:
        raise ValueError("cannot remove DC from an empty record")
    return IQRecord(
        iq.i_samples - iq.i_samples.mean(),
        iq.q_samples - iq.q_samples.mean(),
        fs=iq.fs,
        t0=iq.t0,
    )


def extract_phase(iq: IQRecord) -> Waveform:
    """Four-quadrant phase of each IQ sample, in (-pi, pi] radians."""
    mag_zero = (iq.i_samples == 0.0) & (iq.q_samples == 0.0)
    if np.any(mag_zero):
        idx = int(np.flatnonzero(mag_zero)[0])
        raise ValueError(f"zero-magnitude IQ sample at index {idx}")
    phase = np.arctan2(iq.q_samples, iq.i_samples)
    phase[phase == -np.pi] = np.pi
    return Waveform(phase, fs=iq.fs, t0=iq.t0)


def unwrap_phase(w: Waveform) -> Waveform:
    """Add 2*pi multiples so consecutive phase gaps stay below pi.

    The first sample is kept as-is.
    """
    return Waveform(np.unwrap(w.samples), fs=w.fs, t0=w.t0, valid=w.valid)


def design_fir(spec: FirSpec, fs: float) -> np.ndarray:
    """Kaiser-window high-pass taps meeting `spec` at sample rate `fs`.

    The tap array is symmetric (linear phase) and odd in length so the
    group delay is an integer number of samples.
    """
    nyq = fs / 2.0
    if spec.cutoff_hz >= nyq:
        raise ValueError(f"cutoff {spec.cutoff_hz} Hz is not below Nyquist {nyq} Hz")
    numtaps, beta = kaiserord(spec.stopband_atten_db, spec.transition_hz / nyq)
    if numtaps % 2 == 0:
        numtaps += 1
    if spec.taps is not None:
        if numtaps > spec.taps:
            raise ValueError(
                f"transition {spec.transition_hz} Hz at {spec.stopband_atten_db} dB "
                f"needs {numtaps} taps, exceeding the budget of {spec.taps}"
            )
        numtaps = spec.taps
    return firwin(
        numtaps, spec.cutoff_hz, window=("kaiser", beta), pass_zero=False, fs=fs
    )


def apply_fir_zero_delay(w: Waveform, taps: np.ndarray) -> Waveform:
    """Filter with a symmetric odd-length FIR, compensating its delay.

    The output stays time-aligned with the input; the (len(taps)-1)/2
    samples at each end are marked invalid.
    """
    taps = np.asarray(taps, dtype=float)
    if taps.ndim != 1 or taps.size % 2 == 0:
        raise ValueError("taps must be a 1-D odd-length array")
    if len(w) < taps.size:
        raise ValueError(
            f"waveform of {len(w)} samples is shorter than the {taps.size}-tap filter"
        )
    y = fftconvolve(w.samples, taps, mode="same")
    half = (taps.size - 1) // 2
    lo, hi = w.valid
    return Waveform(y, fs=w.fs, t0=w.t0, valid=(lo + half, hi - half))


def _decimation_lowpass(fs: float, factor: int) -> np.ndarray:
    """Anti-alias lowpass: passband to 0.9x, stopband from 1.0x the new Nyquist."""
    nyq_out = fs / (2.0 * factor)
    numtaps, beta = kaiserord(60.0, (0.1 * nyq_out) / (fs / 2.0))
    if numtaps % 2 == 0:
        numtaps += 1
    return firwin(numtaps, 0.95 * nyq_out, window=("kaiser", beta), fs=fs)


def decimate(w: Waveform, factor: int) -> Waveform:
    """Anti-alias filter then keep every `factor`-th sample.

    Aliased components are suppressed by at least 60 dB.  Lengths that do
    not divide evenly are truncated, never an error.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    if factor == 1:
        return replace(w)
    filtered = apply_fir_zero_delay(w, _decimation_lowpass(w.fs, factor))
    lo, hi = filtered.valid
    new_lo = -(-lo // factor)  # ceil division
    new_hi = -(-hi // factor)
    return Waveform(
        filtered.samples[::factor],
        fs=w.fs / factor,
        t0=w.t0,
        valid=(new_lo, new_hi),
    )


def iq_to_displacement(
    iq: IQRecord,
    fir: FirSpec | None = None,
    decim: int | None = None,
    working_rate: float = 100.0,
) -> Waveform:
    """Full demodulation chain: DC removal, phase, unwrap, decimate, high-pass.

    `decim` defaults to the factor that brings the rate closest to
    `working_rate` (at least 1).  Output units are phase radians.
    """
    fir = fir or FirSpec()
    if decim is None:
        decim = max(1, int(round(iq.fs / working_rate)))
    phase = unwrap_phase(extract_phase(remove_dc(iq)))
    w = decimate(phase, decim)
    return apply_fir_zero_delay(w, design_fir(fir, w.fs))
