"""Batch orchestration: CSV interchange formats, config files, gamma sweeps.

File formats (UTF-8 CSV, `#`-prefixed header comments before the column
header):

    IQ record     ``# fs_hz=<float>`` then ``t_s,i,q``
    displacement  ``# fs_hz=<float>`` then ``t_s,x``
    reference     ``r_time_s`` (one beat instant per row)
    features      ``tau_s,kind``
    estimates     ``t_est_s,ibi_s,kind,c,q``
    sweep         ``gamma,rms_mean,rms_std,tcr_mean,tcr_std``

Optional header comments: ``# t0_s=<float>`` and ``# label=<text>``.
Config files are flat ``key = value`` text; see README for the key list.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp, metrics, topology
from .dsp import FirSpec, IQRecord, Waveform
from .features import FeatureKind, FeaturePoint, extract_features
from .metrics import EvalReport, ReferenceBeats
from .topology import AssignmentTable, IbiEstimate, TopologyParams


class RecordError(RuntimeError):
    """Pipeline failure carrying the identity of the offending record."""

    def __init__(self, label: str, cause: Exception):
        super().__init__(f"record {label!r}: {cause}")
        self.label = label
        self.cause = cause


def default_gamma_grid() -> np.ndarray:
    """-2 to 2 in steps of 0.125, endpoints included (33 values)."""
    return np.arange(-16, 17) / 8.0


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def _read_csv_rows(path):
    """Yield (line_number, fields) for data rows; collect header comments.

    Returns (meta, header_fields, rows).
    """
    meta: dict[str, str] = {}
    header = None
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw:
                continue
            first = raw[0].strip()
            if first.startswith("#"):
                text = ",".join(raw).lstrip("#").strip()
                if "=" in text:
                    key, _, value = text.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = [f.strip() for f in raw]
                continue
            rows.append((lineno, raw))
    if header is None:
        raise ValueError(f"{path}: no column header found")
    return meta, header, rows


def _parse_floats(path, lineno, fields, n_expected):
    if len(fields) != n_expected:
        raise ValueError(
            f"{path}: line {lineno}: expected {n_expected} fields, got {len(fields)}"
        )
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise ValueError(f"{path}: line {lineno}: non-numeric field") from None


def load_record(path) -> IQRecord | Waveform:
    """Load an IQ record (``t_s,i,q``) or displacement waveform (``t_s,x``).

    The ``# fs_hz=`` header is honoured for the sample rate; the first row's
    time becomes t0.
    """
    meta, header, rows = _read_csv_rows(path)
    if "fs_hz" not in meta:
        raise ValueError(f"{path}: missing '# fs_hz=' header")
    fs = float(meta["fs_hz"])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if header == ["t_s", "i", "q"]:
        data = np.asarray(
            [_parse_floats(path, ln, fields, 3) for ln, fields in rows]
        )
        return IQRecord(data[:, 1], data[:, 2], fs=fs, t0=float(data[0, 0]))
    if header == ["t_s", "x"]:
        data = np.asarray(
            [_parse_floats(path, ln, fields, 2) for ln, fields in rows]
        )
        return Waveform(data[:, 1], fs=fs, t0=float(data[0, 0]))
    raise ValueError(f"{path}: unrecognized header {header}")


def load_ref(path) -> ReferenceBeats:
    """Load reference beat times (``r_time_s``), validating monotonicity."""
    _, header, rows = _read_csv_rows(path)
    if header != ["r_time_s"]:
        raise ValueError(f"{path}: expected header 'r_time_s', got {header}")
    times = []
    prev = None
    for lineno, fields in rows:
        (value,) = _parse_floats(path, lineno, fields, 1)
        if prev is not None and value <= prev:
            raise ValueError(
                f"{path}: line {lineno}: beat time {value} not strictly increasing"
            )
        times.append(value)
        prev = value
    return ReferenceBeats(np.asarray(times))


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_iq_csv(iq: IQRecord, path, label: str | None = None) -> None:
    lines = [f"# fs_hz={iq.fs:.9g}", f"# t0_s={iq.t0:.9g}"]
    if label:
        lines.append(f"# label={label}")
    lines.append("t_s,i,q")
    t = iq.times()
    lines.extend(
        f"{t[k]:.6f},{iq.i_samples[k]:.9g},{iq.q_samples[k]:.9g}"
        for k in range(len(iq))
    )
    _write_lines(path, lines)


def write_waveform_csv(w: Waveform, path, label: str | None = None) -> None:
    """Write the valid region of a displacement waveform as ``t_s,x``."""
    lo, hi = w.valid
    if hi <= lo:
        raise ValueError("waveform has no valid samples to write")
    t = w.times()[lo:hi]
    x = w.samples[lo:hi]
    lines = [f"# fs_hz={w.fs:.9g}", f"# t0_s={t[0]:.9g}"]
    if label:
        lines.append(f"# label={label}")
    lines.append("t_s,x")
    lines.extend(f"{t[k]:.6f},{x[k]:.9g}" for k in range(t.size))
    _write_lines(path, lines)


def write_ref_csv(ref: ReferenceBeats, path, label: str | None = None) -> None:
    lines = []
    if label:
        lines.append(f"# label={label}")
    lines.append("r_time_s")
    lines.extend(f"{t:.6f}" for t in ref.r_times)
    _write_lines(path, lines)


def write_features_csv(features: list[FeaturePoint], path) -> None:
    lines = ["tau_s,kind"]
    lines.extend(f"{f.tau:.6f},{f.kind.value}" for f in features)
    _write_lines(path, lines)


def write_estimates_csv(estimates: list[IbiEstimate], path) -> None:
    lines = ["t_est_s,ibi_s,kind,c,q"]
    lines.extend(
        f"{e.t_est:.6f},{e.ibi:.6f},{e.kind.value},{e.c_val:.9f},{e.q_val:.9f}"
        for e in estimates
    )
    _write_lines(path, lines)


def load_estimates_csv(path) -> list[IbiEstimate]:
    _, header, rows = _read_csv_rows(path)
    if header != ["t_est_s", "ibi_s", "kind", "c", "q"]:
        raise ValueError(f"{path}: unrecognized estimates header {header}")
    out = []
    for lineno, fields in rows:
        if len(fields) != 5:
            raise ValueError(f"{path}: line {lineno}: expected 5 fields")
        try:
            kind = FeatureKind(fields[2].strip())
            out.append(
                IbiEstimate(
                    t_est=float(fields[0]),
                    ibi=float(fields[1]),
                    pair=(-1, -1),
                    kind=kind,
                    c_val=float(fields[3]),
                    q_val=float(fields[4]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def parse_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; '#' starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def config_float(cfg: dict, key: str, default: float) -> float:
    return float(cfg[key]) if key in cfg else default


def config_int(cfg: dict, key: str, default: int) -> int:
    return int(cfg[key]) if key in cfg else default


def config_list(cfg: dict, key: str) -> list[str]:
    if key not in cfg or not cfg[key].strip():
        return []
    return [item.strip() for item in cfg[key].split(",") if item.strip()]


def topology_params_from_config(cfg: dict) -> TopologyParams:
    return TopologyParams(
        t_c=config_float(cfg, "tc_s", 0.5),
        t_t=config_float(cfg, "tt_s", 0.5),
        c_th=config_float(cfg, "c_th", 0.7),
        q_th=config_float(cfg, "q_th", 0.5),
        ibi_min=config_float(cfg, "ibi_gate_min_s", 0.4),
        ibi_max=config_float(cfg, "ibi_gate_max_s", 1.2),
    )


def fir_spec_from_config(cfg: dict) -> FirSpec:
    return FirSpec(
        cutoff_hz=config_float(cfg, "hpf_cutoff_hz", 0.5),
        stopband_atten_db=config_float(cfg, "hpf_atten_db", 60.0),
        transition_hz=config_float(cfg, "hpf_transition_hz", 0.4),
    )


def scene_from_config(cfg: dict, seed: int):
    """Build a SyntheticScene from config keys (see README for the list)."""
    from .model import HarmonicModel, SyntheticScene, constant_beats, random_walk_beats

    duration = config_float(cfg, "duration_s", 120.0)
    mode = cfg.get("beat_mode", "constant")
    start = config_float(cfg, "first_beat_s", 0.0)
    if mode == "constant":
        beats = constant_beats(duration, config_float(cfg, "ibi_s", 0.8), start=start)
    elif mode == "random_walk":
        rng = np.random.default_rng(seed)
        beats = random_walk_beats(
            duration,
            rng,
            ibi_start=config_float(cfg, "ibi_start_s", 0.8),
            ibi_min=config_float(cfg, "ibi_min_s", 0.7),
            ibi_max=config_float(cfg, "ibi_max_s", 0.9),
            step_std=config_float(cfg, "ibi_walk_std_s", 0.01),
            start=start,
        )
    else:
        raise ValueError(f"unknown beat_mode {mode!r}")
    nominal_ibi = float(np.median(np.diff(beats)))
    harmonic = HarmonicModel(
        omega0=2.0 * np.pi / nominal_ibi,
        alpha=config_float(cfg, "alpha", 0.4),
        theta=config_float(cfg, "theta", 1.0),
    )
    return SyntheticScene(
        beat_times=beats,
        harmonic=harmonic,
        respiration_amp=config_float(cfg, "respiration_amp", 2.4),
        respiration_freq=config_float(cfg, "respiration_freq_hz", 0.25),
        motion_drift=config_float(cfg, "motion_drift", 0.0),
        noise_std=config_float(cfg, "noise_std", 0.0),
        fs=config_float(cfg, "fs_hz", 100.0),
        heartbeat_amp=config_float(cfg, "heartbeat_amp", 0.3),
        ibi_range=(
            config_float(cfg, "ibi_gate_min_s", 0.4),
            config_float(cfg, "ibi_gate_max_s", 1.2),
        ),
        wavelength=config_float(cfg, "wavelength_mm", 12.5),
        dc_offset=complex(
            config_float(cfg, "dc_offset_i", 0.0),
            config_float(cfg, "dc_offset_q", 0.0),
        ),
        duration=duration,
    )


# ---------------------------------------------------------------------------
# Pipeline composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Everything upstream of the interval estimator."""

    fir: FirSpec = FirSpec()
    working_rate: float = 100.0
    decim: int | None = None
    apply_hpf: bool = True


def prepare_waveform(
    record: IQRecord | Waveform, pipeline: PipelineConfig = PipelineConfig()
) -> Waveform:
    """Demodulate/decimate/high-pass a record into the working waveform.

    IQ records run the full chain.  Displacement inputs are decimated when
    their rate exceeds the working rate and high-passed unless
    `apply_hpf` is off (for inputs already band-limited).
    """
    if isinstance(record, IQRecord):
        if not pipeline.apply_hpf:
            raise ValueError("the high-pass stage cannot be skipped for IQ input")
        return dsp.iq_to_displacement(
            record,
            fir=pipeline.fir,
            decim=pipeline.decim,
            working_rate=pipeline.working_rate,
        )
    w = record
    decim = pipeline.decim
    if decim is None:
        decim = max(1, int(round(w.fs / pipeline.working_rate)))
    w = dsp.decimate(w, decim)
    if pipeline.apply_hpf:
        w = dsp.apply_fir_zero_delay(w, dsp.design_fir(pipeline.fir, w.fs))
    return w


def run_record(
    record: IQRecord | Waveform,
    ref: ReferenceBeats,
    gamma: float,
    params: TopologyParams = TopologyParams(),
    pipeline: PipelineConfig = PipelineConfig(),
    eps_ms: float = 50.0,
    dt_tcr: float = 1.0,
    t_all: float | None = None,
    label: str | None = None,
) -> EvalReport:
    """Full chain for one record: dsp -> features -> topology -> metrics.

    t_all for the coverage metric defaults to the record duration.
    Deterministic; failures are re-raised as RecordError when a label is
    given.
    """
    try:
        if t_all is None:
            t_all = record.duration
        w = prepare_waveform(record, pipeline)
        feats = extract_features(w)
        estimates = topology.estimate_ibis(w, feats, AssignmentTable(gamma), params)
        return metrics.evaluate(
            estimates, ref, eps_ms=eps_ms, dt_tcr=dt_tcr, t_all=t_all
        )
    except Exception as exc:
        if label is not None:
            raise RecordError(label, exc) from exc
        raise


# ---------------------------------------------------------------------------
# Sweeps and Monte Carlo baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """Gamma grid x record cohort evaluation plan.

    `records` and `refs` are parallel lists of CSV paths.
    """

    records: tuple
    refs: tuple
    gamma_values: np.ndarray = field(default_factory=default_gamma_grid)
    params: TopologyParams = TopologyParams()
    pipeline: PipelineConfig = PipelineConfig()
    eps_ms: float = 50.0
    dt_tcr: float = 1.0
    seed: int = 0

    def __post_init__(self):
        gammas = np.asarray(self.gamma_values, dtype=float)
        if gammas.size == 0 or not np.all(np.isfinite(gammas)):
            raise ValueError("gamma grid must be non-empty and finite")
        if len(self.records) != len(self.refs):
            raise ValueError("records and refs must pair up")
        if len(self.records) == 0:
            raise ValueError("no records to sweep")
        object.__setattr__(self, "gamma_values", gammas)
        object.__setattr__(self, "records", tuple(str(p) for p in self.records))
        object.__setattr__(self, "refs", tuple(str(p) for p in self.refs))


@dataclass(frozen=True)
class SweepResult:
    """Per-cell reports plus per-gamma aggregates.

    `reports[i][j]` is the EvalReport for gamma_values[i] on record j (None
    when that record failed).  Aggregate means/stds skip undefined RMS
    cells; std is the population standard deviation.
    """

    gamma_values: np.ndarray
    record_labels: tuple
    reports: tuple
    failures: tuple

    def aggregate(self) -> dict[str, np.ndarray]:
        n_gamma = self.gamma_values.size
        out = {
            "rms_mean": np.full(n_gamma, np.nan),
            "rms_std": np.full(n_gamma, np.nan),
            "tcr_mean": np.full(n_gamma, np.nan),
            "tcr_std": np.full(n_gamma, np.nan),
        }
        for i in range(n_gamma):
            cells = [r for r in self.reports[i] if r is not None]
            rms = np.asarray([c.rms_ms for c in cells if c.rms_ms is not None])
            cov = np.asarray([c.tcr for c in cells])
            if rms.size:
                out["rms_mean"][i] = rms.mean()
                out["rms_std"][i] = rms.std()
            if cov.size:
                out["tcr_mean"][i] = cov.mean()
                out["tcr_std"][i] = cov.std()
        return out


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every (gamma, record) cell of the sweep.

    The gamma-independent stages (demodulation, filtering, feature
    extraction) run once per record; per-record failures are recorded and
    the sweep continues.  Results are deterministic and independent of
    evaluation order.
    """
    n_rec = len(spec.records)
    prepared = []
    failures = []
    for j in range(n_rec):
        label = spec.records[j]
        try:
            record = load_record(spec.records[j])
            ref = load_ref(spec.refs[j])
            w = prepare_waveform(record, spec.pipeline)
            feats = extract_features(w)
            prepared.append((w, feats, ref, record.duration))
        except Exception as exc:
            prepared.append(None)
            failures.append((label, f"{type(exc).__name__}: {exc}"))
    reports = []
    for gamma in spec.gamma_values:
        row = []
        for j in range(n_rec):
            if prepared[j] is None:
                row.append(None)
                continue
            w, feats, ref, t_all = prepared[j]
            estimates = topology.estimate_ibis(
                w, feats, AssignmentTable(float(gamma)), spec.params
            )
            row.append(
                metrics.evaluate(
                    estimates, ref, eps_ms=spec.eps_ms, dt_tcr=spec.dt_tcr, t_all=t_all
                )
            )
        reports.append(tuple(row))
    return SweepResult(
        gamma_values=spec.gamma_values,
        record_labels=tuple(spec.records),
        reports=tuple(reports),
        failures=tuple(failures),
    )


def write_sweep_csv(result: SweepResult, path) -> None:
    agg = result.aggregate()
    lines = ["gamma,rms_mean,rms_std,tcr_mean,tcr_std"]
    for i, gamma in enumerate(result.gamma_values):
        lines.append(
            f"{gamma:.6f},{agg['rms_mean'][i]:.6f},{agg['rms_std'][i]:.6f},"
            f"{agg['tcr_mean'][i]:.6f},{agg['tcr_std'][i]:.6f}"
        )
    _write_lines(path, lines)


def run_monte_carlo(
    record: IQRecord | Waveform,
    ref: ReferenceBeats,
    n_trials: int = 100,
    seed: int = 0,
    params: TopologyParams = TopologyParams(),
    pipeline: PipelineConfig = PipelineConfig(),
    gamma_range: tuple[float, float] = (-2.0, 2.0),
    eps_ms: float = 50.0,
    dt_tcr: float = 1.0,
) -> tuple[np.ndarray, list[EvalReport]]:
    """Random-gamma baseline: n_trials uniform draws over gamma_range.

    Returns the drawn gammas and one report per trial.  Preprocessing and
    feature extraction are shared across trials (they do not depend on
    gamma).
    """
    rng = np.random.default_rng(seed)
    gammas = rng.uniform(gamma_range[0], gamma_range[1], size=n_trials)
    w = prepare_waveform(record, pipeline)
    feats = extract_features(w)
    t_all = record.duration
    reports = []
    for gamma in gammas:
        estimates = topology.estimate_ibis(
            w, feats, AssignmentTable(float(gamma)), params
        )
        reports.append(
            metrics.evaluate(estimates, ref, eps_ms=eps_ms, dt_tcr=dt_tcr, t_all=t_all)
        )
    return gammas, reports
