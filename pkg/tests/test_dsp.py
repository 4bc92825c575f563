"""DC removal, phase extraction, unwrapping, FIR design, decimation."""

import numpy as np
import pytest
from scipy.signal import welch

from topobeat.dsp import (
    FirSpec,
    IQRecord,
    Waveform,
    apply_fir_zero_delay,
    decimate,
    design_fir,
    extract_phase,
    iq_to_displacement,
    remove_dc,
    unwrap_phase,
)


def _wrap(x):
    return np.mod(x + np.pi, 2 * np.pi) - np.pi


# ---------------------------------------------------------------------------
# remove_dc
# ---------------------------------------------------------------------------


def test_remove_dc_constant_record():
    iq = IQRecord(np.full(50, 3.0), np.full(50, -2.0), fs=100.0)
    out = remove_dc(iq)
    assert np.allclose(out.i_samples, 0.0)
    assert np.allclose(out.q_samples, 0.0)


def test_remove_dc_offset_invariance():
    rng = np.random.default_rng(0)
    i = rng.standard_normal(200)
    q = rng.standard_normal(200)
    base = remove_dc(IQRecord(i, q, fs=10.0))
    shifted = remove_dc(IQRecord(i + 1.7, q - 0.4, fs=10.0))
    assert np.allclose(base.i_samples, shifted.i_samples, atol=1e-12)
    assert np.allclose(base.q_samples, shifted.q_samples, atol=1e-12)


def test_remove_dc_circle_arc():
    # arc centered at (0.5, 0.5); the output mean must be the origin even
    # though the arc's own mean is not its centre
    ang = np.linspace(0.3, 2.1, 500)
    iq = IQRecord(0.5 + np.cos(ang), 0.5 + np.sin(ang), fs=100.0)
    out = remove_dc(iq)
    expected_i = iq.i_samples - np.mean(iq.i_samples)  # direct mean oracle
    assert abs(np.mean(out.i_samples)) < 1e-12
    assert abs(np.mean(out.q_samples)) < 1e-12
    assert np.allclose(out.i_samples, expected_i)


def test_remove_dc_idempotent():
    rng = np.random.default_rng(1)
    iq = IQRecord(rng.standard_normal(64) + 2, rng.standard_normal(64), fs=1.0)
    once = remove_dc(iq)
    twice = remove_dc(once)
    assert np.allclose(once.i_samples, twice.i_samples, atol=1e-14)
    assert np.allclose(once.q_samples, twice.q_samples, atol=1e-14)


def test_remove_dc_empty_record():
    iq = IQRecord(np.array([]), np.array([]), fs=100.0)
    with pytest.raises(ValueError):
        remove_dc(iq)


# ---------------------------------------------------------------------------
# extract_phase / unwrap_phase
# ---------------------------------------------------------------------------


def test_extract_phase_quadrants():
    iq = IQRecord(np.array([1.0, 0.0, -1.0]), np.array([0.0, 1.0, -1.0]), fs=1.0)
    out = extract_phase(iq)
    assert out.samples[0] == pytest.approx(0.0)
    assert out.samples[1] == pytest.approx(np.pi / 2)
    assert out.samples[2] == pytest.approx(-3 * np.pi / 4)


def test_extract_phase_range_half_open():
    ang = np.linspace(-np.pi, np.pi, 721)
    iq = IQRecord(np.cos(ang), np.sin(ang), fs=1.0)
    out = extract_phase(iq)
    assert np.all(out.samples > -np.pi)
    assert np.all(out.samples <= np.pi)


def test_extract_phase_zero_sample_names_index():
    iq = IQRecord(np.array([1.0, 1.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0, 1.0]), fs=1.0)
    with pytest.raises(ValueError, match="index 2"):
        extract_phase(iq)


def test_unwrap_no_gaps_unchanged():
    w = Waveform(np.array([0.0, 0.1, 0.2]), fs=1.0)
    assert np.array_equal(unwrap_phase(w).samples, w.samples)


def test_unwrap_single_gap():
    # gap 3.0 -> -3.0 is -6.0; adding 2*pi makes it 2*pi - 6 < pi
    w = Waveform(np.array([3.0, -3.0]), fs=1.0)
    out = unwrap_phase(w).samples
    assert out[0] == pytest.approx(3.0)
    assert out[1] == pytest.approx(2 * np.pi - 3.0)


def test_unwrap_round_trip_and_gap_bound():
    rng = np.random.default_rng(2)
    for _ in range(10):
        true = np.cumsum(rng.uniform(-2.5, 2.5, size=400))
        wrapped = _wrap(true)
        un = unwrap_phase(Waveform(wrapped, fs=1.0)).samples
        assert un[0] == wrapped[0]
        assert np.max(np.abs(np.diff(un))) < np.pi
        assert np.allclose(_wrap(un), _wrap(wrapped), atol=1e-9)


# ---------------------------------------------------------------------------
# design_fir
# ---------------------------------------------------------------------------


def test_fir_dc_rejection_and_symmetry():
    taps = design_fir(FirSpec(), fs=100.0)
    assert taps.size % 2 == 1
    assert np.allclose(taps, taps[::-1], atol=1e-15)
    dc_gain_db = 20 * np.log10(abs(np.sum(taps)))
    assert dc_gain_db <= -60.0
    # DC null within the stopband ripple of the unit passband gain
    assert abs(np.sum(taps)) <= 10 ** (-60 / 20)


def test_fir_white_noise_stopband():
    # 0.2 Hz transition centred on 0.5 Hz: stopband up to 0.4 Hz
    fs = 100.0
    taps = design_fir(FirSpec(transition_hz=0.2), fs=fs)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(2**17)
    y = apply_fir_zero_delay(Waveform(x, fs=fs), taps)
    lo, hi = y.valid
    f, psd = welch(y.samples[lo:hi], fs=fs, nperseg=2**14, window=("kaiser", 16.0))
    stop = psd[(f >= 0.05) & (f <= 0.38)].mean()
    heart = psd[(f >= 1.0) & (f <= 5.0)].mean()
    assert 10 * np.log10(stop / heart) <= -55.0


def test_fir_tap_budget_error_reports_requirement():
    with pytest.raises(ValueError, match=r"needs \d+ taps"):
        design_fir(FirSpec(transition_hz=0.2, taps=101), fs=100.0)


def test_fir_spec_validation():
    with pytest.raises(ValueError):
        FirSpec(kind="lowpass")
    with pytest.raises(ValueError):
        FirSpec(stopband_atten_db=40.0)
    with pytest.raises(ValueError):
        FirSpec(taps=100)
    with pytest.raises(ValueError):
        design_fir(FirSpec(cutoff_hz=60.0), fs=100.0)


# ---------------------------------------------------------------------------
# apply_fir_zero_delay
# ---------------------------------------------------------------------------


def test_fir_impulse_response_centred():
    taps = design_fir(FirSpec(), fs=100.0)
    n = taps.size + 200
    x = np.zeros(n)
    centre = n // 2
    x[centre] = 1.0
    y = apply_fir_zero_delay(Waveform(x, fs=100.0), taps)
    half = (taps.size - 1) // 2
    assert np.allclose(y.samples[centre - half : centre + half + 1], taps, atol=1e-12)


def test_fir_passband_tone_alignment():
    fs = 100.0
    taps = design_fir(FirSpec(), fs=fs)
    t = np.arange(int(60 * fs)) / fs
    x = np.sin(2 * np.pi * 1.2 * t)
    y = apply_fir_zero_delay(Waveform(x, fs=fs), taps)
    lo, hi = y.valid
    seg_y = y.samples[lo:hi]
    seg_x = x[lo:hi]
    lags = np.arange(-20, 21)
    xcorr = [np.dot(seg_y[20 + k : -21 + k], seg_x[20:-21]) for k in lags]
    assert lags[int(np.argmax(xcorr))] == 0


def test_fir_rejects_constant():
    fs = 100.0
    taps = design_fir(FirSpec(), fs=fs)
    x = np.full(taps.size + 500, 5.0)
    y = apply_fir_zero_delay(Waveform(x, fs=fs), taps)
    lo, hi = y.valid
    assert np.max(np.abs(y.samples[lo:hi])) <= 5.0 * 10 ** (-60 / 20)


def test_fir_too_short_waveform():
    taps = design_fir(FirSpec(), fs=100.0)
    with pytest.raises(ValueError):
        apply_fir_zero_delay(Waveform(np.zeros(taps.size - 1), fs=100.0), taps)


def test_fir_marks_edges_invalid():
    taps = np.array([0.25, 0.5, 0.25])
    w = Waveform(np.ones(10), fs=1.0)
    y = apply_fir_zero_delay(w, taps)
    assert y.valid == (1, 9)


# ---------------------------------------------------------------------------
# decimate
# ---------------------------------------------------------------------------


def test_decimate_identity():
    w = Waveform(np.arange(10.0), fs=10.0)
    out = decimate(w, 1)
    assert out.fs == w.fs
    assert np.array_equal(out.samples, w.samples)


def _tone_amplitude(w, freq, span=4.0):
    lo, hi = w.valid
    n = int(span * w.fs)
    seg = w.samples[lo : lo + n]
    t = np.arange(n) / w.fs
    basis = np.exp(-2j * np.pi * freq * t)
    return 2.0 * abs(np.dot(seg, basis)) / n


def test_decimate_preserves_passband_tone():
    fs, factor = 2000.0, 20
    t = np.arange(int(20 * fs)) / fs
    x = np.sin(2 * np.pi * 1.0 * t)
    out = decimate(Waveform(x, fs=fs), factor)
    assert out.fs == pytest.approx(100.0)
    lo, hi = out.valid
    n = hi - lo
    tt = (lo + np.arange(n)) / out.fs
    design = np.column_stack([np.sin(2 * np.pi * tt), np.cos(2 * np.pi * tt)])
    coef, *_ = np.linalg.lstsq(design, out.samples[lo:hi], rcond=None)
    assert np.hypot(*coef) == pytest.approx(1.0, abs=0.01)


def test_decimate_alias_suppression():
    fs, factor = 2000.0, 20
    t = np.arange(int(20 * fs)) / fs
    keep = decimate(Waveform(np.sin(2 * np.pi * 45.0 * t), fs=fs), factor)
    fold = decimate(Waveform(np.sin(2 * np.pi * 70.0 * t), fs=fs), factor)
    assert _tone_amplitude(keep, 45.0) > 0.97
    # 70 Hz folds onto 30 Hz at the 100 Hz output rate
    assert _tone_amplitude(fold, 30.0) <= 10 ** (-60 / 20)


def test_decimate_truncates_odd_lengths():
    w = Waveform(np.sin(np.arange(40003) * 0.001), fs=2000.0)
    out = decimate(w, 20)
    assert len(out) == 2001  # ceil(40003 / 20), never an error
    assert out.fs == pytest.approx(100.0)


def test_decimate_validation():
    w = Waveform(np.zeros(100), fs=10.0)
    with pytest.raises(ValueError):
        decimate(w, 0)
    with pytest.raises(ValueError):
        decimate(w, 2.5)


# ---------------------------------------------------------------------------
# chain properties
# ---------------------------------------------------------------------------


def test_chain_scale_equivariance():
    # small-phase regime: no wrapping, so unwrap+FIR act linearly
    fs = 100.0
    taps = design_fir(FirSpec(), fs=fs)
    rng = np.random.default_rng(4)
    t = np.arange(int(40 * fs)) / fs
    base = 0.2 * np.sin(2 * np.pi * 1.1 * t) + 0.05 * np.sin(2 * np.pi * 2.3 * t + 1.0)
    for k in (2.0, 0.5, 3.7):
        y1 = apply_fir_zero_delay(unwrap_phase(Waveform(base, fs=fs)), taps)
        yk = apply_fir_zero_delay(unwrap_phase(Waveform(k * base, fs=fs)), taps)
        lo, hi = y1.valid
        assert np.allclose(yk.samples[lo:hi], k * y1.samples[lo:hi], atol=1e-11)


def test_iq_to_displacement_recovers_tone():
    # multi-radian arc: mean subtraction then re-centres the circle well,
    # and a 1.3 Hz phase tone survives the whole chain at full amplitude
    # (small arcs are a known bad regime for mean-subtraction demodulation)
    fs = 400.0
    t = np.arange(int(80 * fs)) / fs
    phase = 2.4 * np.sin(2 * np.pi * 1.3 * t)
    z = 0.4 - 0.2j + np.exp(1j * phase)
    iq = IQRecord(z.real, z.imag, fs=fs)
    out = iq_to_displacement(iq, decim=4)
    assert out.fs == pytest.approx(100.0)
    amp = _tone_amplitude(out, 1.3, span=8.0)
    assert amp == pytest.approx(2.4, rel=0.02)
