"""Reference matching, RMS error, and time coverage rate."""

import numpy as np
import pytest

from topobeat.features import FeatureKind
from topobeat.metrics import (
    EvalReport,
    ReferenceBeats,
    evaluate,
    reference_ibi_at,
    rms_error,
    tcr,
)
from topobeat.topology import IbiEstimate


def _est(t_est, ibi):
    return IbiEstimate(
        t_est=t_est, ibi=ibi, pair=(0, 1), kind=FeatureKind.PK, c_val=1.0, q_val=1.0
    )


def _ref(*times):
    return ReferenceBeats(np.asarray(times, dtype=float))


# ---------------------------------------------------------------------------
# reference_ibi_at
# ---------------------------------------------------------------------------


def test_reference_interval_lookup():
    ref = _ref(0.0, 0.8, 1.6)
    assert reference_ibi_at(ref, 0.4) == pytest.approx(0.8)


def test_reference_lookup_outside_span():
    ref = _ref(0.0, 0.8, 1.6)
    assert reference_ibi_at(ref, 1.7) is None
    assert reference_ibi_at(ref, -0.1) is None


def test_reference_lookup_boundary_is_half_open():
    ref = _ref(0.0, 0.8, 2.0)
    assert reference_ibi_at(ref, 0.8) == pytest.approx(1.2)  # second interval
    assert reference_ibi_at(ref, 0.8 - 1e-9) == pytest.approx(0.8)


def test_reference_validation():
    with pytest.raises(ValueError):
        _ref(0.0, 0.8, 0.8)
    with pytest.raises(ValueError):
        _ref(0.0, 0.8, 0.5)


# ---------------------------------------------------------------------------
# rms_error
# ---------------------------------------------------------------------------


def test_rms_zero_for_exact_estimates():
    ref = _ref(0.0, 0.8, 1.6, 2.4)
    estimates = [_est(0.4, 0.8), _est(1.2, 0.8), _est(2.0, 0.8)]
    rms, residuals = rms_error(estimates, ref)
    assert rms == pytest.approx(0.0)
    assert residuals.size == 3


def test_rms_single_offset():
    ref = _ref(0.0, 0.8, 1.6)
    rms, residuals = rms_error([_est(0.4, 0.85)], ref)
    assert rms == pytest.approx(50.0)
    assert residuals[0] == pytest.approx(50.0)


def test_rms_undefined_when_nothing_matches():
    ref = _ref(0.0, 0.8)
    rms, residuals = rms_error([_est(5.0, 0.8)], ref)
    assert rms is None
    assert residuals.size == 0


def test_rms_permutation_invariant():
    ref = _ref(0.0, 0.8, 1.6, 2.4, 3.2)
    rng = np.random.default_rng(10)
    estimates = [_est(float(t), float(t) / 4) for t in rng.uniform(0.1, 3.1, 40)]
    base, _ = rms_error(estimates, ref)
    shuffled = list(estimates)
    rng.shuffle(shuffled)
    again, _ = rms_error(shuffled, ref)
    assert base == pytest.approx(again, abs=1e-12)


def test_evaluate_counts_exclusions():
    ref = _ref(0.0, 0.8, 1.6)
    report = evaluate([_est(0.4, 0.8), _est(9.0, 0.8)], ref, t_all=2.0)
    assert report.n_estimates == 2
    assert report.excluded == 1
    assert report.rms_ms == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# tcr
# ---------------------------------------------------------------------------


def test_tcr_full_coverage():
    ref = _ref(*np.arange(0.0, 10.5, 0.5))
    estimates = [_est(k + 0.25, 0.5) for k in range(10)]
    assert tcr(estimates, ref, t_all=10.0) == pytest.approx(1.0)


def test_tcr_no_estimates():
    ref = _ref(0.0, 1.0, 2.0)
    assert tcr([], ref, t_all=10.0) == pytest.approx(0.0)


def test_tcr_half_coverage():
    # 600 s record, accurate estimates only during the first 300 s
    beats = np.arange(0.0, 600.5, 0.5)
    ref = ReferenceBeats(beats)
    estimates = [_est(t + 0.2, 0.5) for t in np.arange(0.0, 300.0, 1.0)]
    assert tcr(estimates, ref, t_all=600.0) == pytest.approx(0.5)


def test_tcr_drops_final_partial_interval():
    ref = _ref(*np.arange(0.0, 11.0, 0.5))
    estimates = [_est(k + 0.25, 0.5) for k in range(10)]
    # 10.7 s total: ten full intervals, the 0.7 s remainder is dropped
    assert tcr(estimates, ref, t_all=10.7) == pytest.approx(1.0)


def test_tcr_epsilon_strictly_less():
    ref = _ref(0.0, 0.5, 1.0)
    exactly_eps = [_est(0.25, 0.55)]  # 50 ms residual
    assert tcr(exactly_eps, ref, eps_ms=50.0, t_all=1.0) == pytest.approx(0.0)
    assert tcr(exactly_eps, ref, eps_ms=50.1, t_all=1.0) == pytest.approx(1.0)


def test_tcr_monotone_in_eps_and_estimates():
    rng = np.random.default_rng(11)
    beats = np.cumsum(rng.uniform(0.6, 1.0, 80))
    ref = ReferenceBeats(beats)
    estimates = [
        _est(float(t), float(reference_ibi_at(ref, t)) + float(e))
        for t, e in zip(
            rng.uniform(beats[0], beats[-1] - 0.1, 60),
            rng.normal(0.0, 0.05, 60),
        )
    ]
    t_all = float(beats[-1])
    values = [tcr(estimates, ref, eps_ms=e, t_all=t_all) for e in (10, 25, 50, 100)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    subset = estimates[:20]
    assert tcr(subset, ref, t_all=t_all) <= tcr(estimates, ref, t_all=t_all)


def test_tcr_validation():
    ref = _ref(0.0, 1.0)
    with pytest.raises(ValueError):
        tcr([], ref, dt_tcr=0.0, t_all=5.0)
    with pytest.raises(ValueError):
        tcr([], ref, t_all=-1.0)


def test_report_json_shape():
    report = EvalReport(
        rms_ms=12.5, tcr=0.9, n_estimates=4, residuals_ms=np.zeros(4), excluded=0
    )
    assert report.to_json_dict() == {
        "rms_ms": 12.5,
        "tcr": 0.9,
        "n_estimates": 4,
        "excluded": 0,
    }
