"""Two-harmonic heartbeat displacement model and synthetic radar scenes.

The closed-form model is a unit-amplitude fundamental plus a weaker second
harmonic.  It drives three things: analytic derivative oracles for the
feature extractor, the feasibility bounds on the harmonic-to-fundamental
derivative ratio (which yield the optimal inflection weight gamma = 5/8),
and a deterministic synthetic-scene generator that produces IQ records with
exact ground-truth beat times for end-to-end evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import IQRecord, Waveform

TWO_PI = 2.0 * np.pi

# Root of the mean squared harmonic-to-fundamental derivative ratio over the
# rising half-cycle, assuming the squared ratio is uniformly distributed
# between its feasibility bounds (see mean_rho_squared).  Exactly 5/8.
OPTIMAL_GAMMA = 0.625


@dataclass(frozen=True)
class HarmonicModel:
    """Displacement s(t) = cos(omega0 t) + alpha cos(2 omega0 t + theta).

    omega0 : fundamental angular frequency (rad/s), > 0
    alpha  : second-harmonic amplitude relative to the fundamental, in [0, 1)
    theta  : second-harmonic initial phase (rad)
    """

    omega0: float
    alpha: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")

    @property
    def beta1(self) -> float:
        """Fundamental coefficient of the first derivative: -omega0."""
        return -self.omega0

    @property
    def beta2(self) -> float:
        """Harmonic coefficient of the first derivative: -2 omega0 alpha."""
        return -2.0 * self.omega0 * self.alpha

    @property
    def rho(self) -> float:
        """|beta2 / beta1| = 2 alpha, always < 2."""
        return 2.0 * self.alpha


def eval_model(m: HarmonicModel, t, order: int = 0):
    """Evaluate s(t) or one of its first three derivatives in closed form.

    `t` may be a scalar or array (seconds).  `order` selects s, s', s'' or
    s'''.  No numerical differentiation is involved.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be one of 0..3, got {order}")
    t_arr = np.asarray(t, dtype=float)
    w = m.omega0
    ph1 = w * t_arr
    ph2 = 2.0 * w * t_arr + m.theta
    b1, b2 = m.beta1, m.beta2
    if order == 0:
        out = np.cos(ph1) + m.alpha * np.cos(ph2)
    elif order == 1:
        out = b1 * np.sin(ph1) + b2 * np.sin(ph2)
    elif order == 2:
        out = w * (b1 * np.cos(ph1) + 2.0 * b2 * np.cos(ph2))
    else:
        out = -(w**2) * (b1 * np.sin(ph1) + 4.0 * b2 * np.sin(ph2))
    if np.ndim(t) == 0:
        return float(out)
    return out


def first_derivative_components(m: HarmonicModel, t):
    """Fundamental and harmonic parts of s'(t), as a pair.

    Returns (beta1 sin(omega0 t), beta2 sin(2 omega0 t + theta)); their sum
    is s'(t).  At a rising-derivative-valley the two have opposite signs.
    """
    t_arr = np.asarray(t, dtype=float)
    fund = m.beta1 * np.sin(m.omega0 * t_arr)
    harm = m.beta2 * np.sin(2.0 * m.omega0 * t_arr + m.theta)
    if np.ndim(t) == 0:
        return float(fund), float(harm)
    return fund, harm


def rdv_conditions_hold(m: HarmonicModel, t, zero_tol: float | None = None):
    """Check the three defining conditions of a rising-derivative-valley.

    The conditions at time t are s'(t) > 0, s''(t) = 0 and s'''(t) > 0.
    Equality is tested as |s''(t)| < zero_tol; the default tolerance is
    scale-free, 1e-9 times the amplitude bound of s''.

    Returns a boolean triple (one per condition); their conjunction is true
    iff t is an RDV instant.  Accepts scalar or array t.
    """
    if zero_tol is None:
        zero_tol = 1e-9 * m.omega0**2 * (1.0 + 4.0 * m.alpha)
    d1 = eval_model(m, t, 1)
    d2 = eval_model(m, t, 2)
    d3 = eval_model(m, t, 3)
    if np.ndim(t) == 0:
        return (d1 > 0.0, abs(d2) < zero_tol, d3 > 0.0)
    return (d1 > 0.0, np.abs(d2) < zero_tol, d3 > 0.0)


def _rho_bounds_unchecked(x):
    c2 = np.cos(x) ** 2
    lower = (1.0 + 3.0 * c2) / 16.0
    upper = (4.0 - 3.0 * c2) / 4.0
    return lower, upper


def rho_bounds(x):
    """Feasibility bounds on rho^2 at phase x = omega0 t of an RDV instant.

    Valid for x in [pi, 2*pi), the half-cycle on which the fundamental part
    of s'(t) is positive.  Returns (lower, upper); the bounds coincide only
    where cos^2 x = 1.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any((x_arr < np.pi) | (x_arr >= TWO_PI)):
        raise ValueError("phase x must lie in [pi, 2*pi)")
    lower, upper = _rho_bounds_unchecked(x_arr)
    if np.ndim(x) == 0:
        return float(lower), float(upper)
    return lower, upper


def mean_rho_squared(n_points: int, rule: str = "midpoint") -> float:
    """Average of the midpoint of the rho^2 bounds over x in [pi, 2*pi).

    Integrates (lower + upper) / 2 with respect to x and divides by the
    interval length pi.  Assumes rho^2 uniformly distributed between the
    bounds -- an assumption adopted as stated, without further
    justification (see README).  Converges to 25/64 = (5/8)^2.

    `rule` selects "midpoint" or "trapezoid" quadrature so the two can
    cross-check each other.
    """
    if n_points < 100:
        raise ValueError(f"n_points must be >= 100, got {n_points}")
    if rule == "midpoint":
        h = np.pi / n_points
        x = np.pi + (np.arange(n_points) + 0.5) * h
        lower, upper = _rho_bounds_unchecked(x)
        integral = np.sum(0.5 * (lower + upper)) * h
    elif rule == "trapezoid":
        x = np.linspace(np.pi, TWO_PI, n_points)
        lower, upper = _rho_bounds_unchecked(x)
        f = 0.5 * (lower + upper)
        h = x[1] - x[0]
        integral = h * (0.5 * f[0] + np.sum(f[1:-1]) + 0.5 * f[-1])
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return float(integral / np.pi)


def optimal_gamma(n_points: int = 1_000_000) -> float:
    """Numerically derived optimal inflection weight, sqrt(mean rho^2).

    Equals OPTIMAL_GAMMA = 0.625 up to quadrature error.
    """
    return float(np.sqrt(mean_rho_squared(n_points)))


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticScene:
    """Recipe for a synthetic radar record with known beat times.

    The heartbeat displacement time-warps one canonical two-harmonic beat
    template so that each true beat interval matches the differences of
    `beat_times` exactly.  Respiration is a sinusoid plus optional
    harmonics (`respiration_harmonics` holds relative amplitudes of the
    2nd, 3rd, ... harmonics; the 3rd falls into the heart band after
    high-pass filtering, the dominant residual disturbance in practice).
    Body motion is a slow random walk, noise additive white Gaussian; all
    displacement amplitudes share one unit (millimetres by convention,
    converted to radar phase as 4*pi*d/wavelength).

    `harmonic.omega0` sets only the nominal beat rate; the per-beat rate
    comes from `beat_times`.
    """

    beat_times: np.ndarray
    harmonic: HarmonicModel
    respiration_amp: float = 2.4
    respiration_freq: float = 0.25
    respiration_harmonics: tuple[float, ...] = ()
    motion_drift: float = 0.0
    noise_std: float = 0.0
    fs: float = 100.0
    heartbeat_amp: float = 0.3
    ibi_range: tuple[float, float] = (0.4, 1.2)
    wavelength: float = 12.5
    dc_offset: complex = 0.0 + 0.0j
    duration: float | None = None

    def __post_init__(self):
        beats = np.asarray(self.beat_times, dtype=float)
        if beats.ndim != 1 or beats.size < 2:
            raise ValueError("beat_times must be a 1-D array of >= 2 instants")
        ibis = np.diff(beats)
        if np.any(ibis <= 0):
            raise ValueError("beat_times must be strictly increasing")
        lo, hi = self.ibi_range
        if not 0 < lo < hi:
            raise ValueError(f"invalid ibi_range {self.ibi_range}")
        if np.any(ibis < lo) or np.any(ibis > hi):
            raise ValueError(
                f"beat intervals [{ibis.min():.3f}, {ibis.max():.3f}] s violate "
                f"the configured range [{lo}, {hi}] s"
            )
        f_max = max(2.0 / float(ibis.min()), self.respiration_freq)
        if self.fs < 4.0 * f_max:
            raise ValueError(
                f"fs={self.fs} Hz is below 4x the highest component "
                f"frequency ({f_max:.2f} Hz)"
            )
        for name in ("respiration_amp", "noise_std", "heartbeat_amp", "motion_drift"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        object.__setattr__(self, "beat_times", beats)

    @property
    def span(self) -> float:
        """Record length in seconds."""
        if self.duration is not None:
            return float(self.duration)
        return float(self.beat_times[-1])


@dataclass(frozen=True)
class SyntheticRecord:
    """Output of synthesize(): IQ record, plain displacement, ground truth."""

    iq: IQRecord
    displacement: Waveform
    beat_times: np.ndarray


def constant_beats(duration: float, ibi: float, start: float = 0.0) -> np.ndarray:
    """Beat instants at a fixed interval covering [start, duration]."""
    if ibi <= 0 or duration <= start:
        raise ValueError("need ibi > 0 and duration > start")
    n = int(np.floor((duration - start) / ibi)) + 1
    return start + ibi * np.arange(n)


def random_walk_beats(
    duration: float,
    rng: np.random.Generator,
    ibi_start: float = 0.8,
    ibi_min: float = 0.7,
    ibi_max: float = 0.9,
    step_std: float = 0.01,
    start: float = 0.0,
) -> np.ndarray:
    """Beat train whose interval performs a clipped Gaussian random walk."""
    if not ibi_min <= ibi_start <= ibi_max:
        raise ValueError("ibi_start must lie within [ibi_min, ibi_max]")
    times = [start]
    ibi = ibi_start
    while times[-1] + ibi <= duration:
        times.append(times[-1] + ibi)
        ibi = float(np.clip(ibi + step_std * rng.standard_normal(), ibi_min, ibi_max))
    return np.asarray(times)


def _beat_phase(t: np.ndarray, beats: np.ndarray) -> np.ndarray:
    """Piecewise-linear warp phase: 2*pi*k exactly at the k-th beat."""
    knots = TWO_PI * np.arange(beats.size)
    phase = np.interp(t, beats, knots)
    ibi_first = beats[1] - beats[0]
    ibi_last = beats[-1] - beats[-2]
    before = t < beats[0]
    after = t > beats[-1]
    phase[before] = TWO_PI * (t[before] - beats[0]) / ibi_first
    phase[after] = knots[-1] + TWO_PI * (t[after] - beats[-1]) / ibi_last
    return phase


def synthesize(scene: SyntheticScene, seed: int) -> SyntheticRecord:
    """Generate the IQ record and plain displacement for a scene.

    Deterministic: the same (scene, seed) pair yields bit-identical output.
    The displacement waveform is exactly what the IQ phase encodes
    (heartbeat + respiration + drift + noise), so the demodulation chain
    can be checked against it directly.
    """
    rng = np.random.default_rng(seed)
    n = int(round(scene.span * scene.fs))
    if n < 2:
        raise ValueError("scene spans fewer than two samples")
    t = np.arange(n) / scene.fs

    phase = _beat_phase(t, scene.beat_times)
    hm = scene.harmonic
    heart = scene.heartbeat_amp * (
        np.cos(phase) + hm.alpha * np.cos(2.0 * phase + hm.theta)
    )

    resp_phase = rng.uniform(0.0, TWO_PI)
    resp = np.sin(TWO_PI * scene.respiration_freq * t + resp_phase)
    for k, rel in enumerate(scene.respiration_harmonics, start=2):
        resp += rel * np.sin(k * (TWO_PI * scene.respiration_freq * t + resp_phase))
    resp *= scene.respiration_amp
    drift = scene.motion_drift * np.cumsum(rng.standard_normal(n)) / np.sqrt(scene.fs)
    noise = scene.noise_std * rng.standard_normal(n)

    disp = heart + resp + drift + noise
    iq_phase = (4.0 * np.pi / scene.wavelength) * disp
    z = scene.dc_offset + np.exp(1j * iq_phase)

    iq = IQRecord(z.real, z.imag, fs=scene.fs, t0=0.0)
    wave = Waveform(disp, fs=scene.fs, t0=0.0)
    return SyntheticRecord(iq=iq, displacement=wave, beat_times=scene.beat_times.copy())
