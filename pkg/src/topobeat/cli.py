"""Batch command-line interface.

Subcommands: synth, preprocess, extract, estimate, eval, sweep.  Exit code
0 on success; on failure a machine-readable JSON error object is printed
to stderr and the exit code is nonzero.  Flags override config-file keys.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import dsp, harness, metrics, model, topology
from .features import extract_features
from .harness import (
    PipelineConfig,
    SweepSpec,
    config_float,
    config_int,
    config_list,
    fir_spec_from_config,
    parse_config,
    scene_from_config,
    topology_params_from_config,
)
from .topology import AssignmentTable, TopologyParams


def _add_pipeline_flags(parser):
    parser.add_argument("--hpf-cutoff", type=float, default=None, help="high-pass cutoff (Hz)")
    parser.add_argument("--hpf-atten-db", type=float, default=None, help="stopband attenuation (dB)")
    parser.add_argument("--hpf-transition", type=float, default=None, help="transition width (Hz)")
    parser.add_argument("--decim", type=int, default=None, help="decimation factor (default: to ~100 Hz)")
    parser.add_argument("--working-rate", type=float, default=None, help="target working rate (Hz)")
    parser.add_argument("--no-hpf", action="store_true", help="skip the high-pass stage (displacement input already filtered)")


def _pipeline_from(args, cfg) -> PipelineConfig:
    fir = dsp.FirSpec(
        cutoff_hz=args.hpf_cutoff
        if args.hpf_cutoff is not None
        else config_float(cfg, "hpf_cutoff_hz", 0.5),
        stopband_atten_db=args.hpf_atten_db
        if args.hpf_atten_db is not None
        else config_float(cfg, "hpf_atten_db", 60.0),
        transition_hz=args.hpf_transition
        if args.hpf_transition is not None
        else config_float(cfg, "hpf_transition_hz", 0.4),
    )
    decim = args.decim if args.decim is not None else cfg.get("decim")
    return PipelineConfig(
        fir=fir,
        working_rate=args.working_rate
        if args.working_rate is not None
        else config_float(cfg, "working_rate_hz", 100.0),
        decim=int(decim) if decim is not None else None,
        apply_hpf=not args.no_hpf,
    )


def _params_from(args, cfg) -> TopologyParams:
    base = topology_params_from_config(cfg)
    return TopologyParams(
        t_c=args.tc if args.tc is not None else base.t_c,
        t_t=args.tt if args.tt is not None else base.t_t,
        c_th=args.cth if args.cth is not None else base.c_th,
        q_th=args.qth if args.qth is not None else base.q_th,
        ibi_min=args.ibi_min if args.ibi_min is not None else base.ibi_min,
        ibi_max=args.ibi_max if args.ibi_max is not None else base.ibi_max,
    )


def _load_config(path) -> dict:
    return parse_config(path) if path else {}


def _cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else config_int(cfg, "seed", 0)
    scene = scene_from_config(cfg, seed)
    record = model.synthesize(scene, seed)
    label = cfg.get("label")
    harness.write_iq_csv(record.iq, args.out, label=label)
    harness.write_ref_csv(metrics.ReferenceBeats(record.beat_times), args.ref_out, label=label)
    if args.displacement_out:
        harness.write_waveform_csv(record.displacement, args.displacement_out, label=label)
    return 0


def _cmd_preprocess(args) -> int:
    cfg = _load_config(args.config)
    record = harness.load_record(args.infile)
    pipeline = _pipeline_from(args, cfg)
    w = harness.prepare_waveform(record, pipeline)
    harness.write_waveform_csv(w, args.out)
    return 0


def _cmd_extract(args) -> int:
    cfg = _load_config(args.config)
    record = harness.load_record(args.infile)
    w = harness.prepare_waveform(record, _pipeline_from(args, cfg))
    harness.write_features_csv(extract_features(w), args.out)
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    record = harness.load_record(args.infile)
    w = harness.prepare_waveform(record, _pipeline_from(args, cfg))
    gamma = args.gamma if args.gamma is not None else config_float(cfg, "gamma", 0.625)
    feats = extract_features(w)
    estimates = topology.estimate_ibis(
        w, feats, AssignmentTable(gamma), _params_from(args, cfg)
    )
    harness.write_estimates_csv(estimates, args.out)
    return 0


def _cmd_eval(args) -> int:
    ref = harness.load_ref(args.ref)
    estimates = harness.load_estimates_csv(args.est)
    report = metrics.evaluate(
        estimates, ref, eps_ms=args.eps_ms, dt_tcr=args.dt_tcr, t_all=args.t_all
    )
    text = json.dumps(report.to_json_dict(), indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _parse_gamma_grid(cfg) -> np.ndarray:
    spec = cfg.get("gamma_grid", "")
    if not spec:
        return harness.default_gamma_grid()
    if ":" in spec:
        start, stop, step = (float(v) for v in spec.split(":"))
        n = int(round((stop - start) / step))
        return start + step * np.arange(n + 1)
    return np.asarray([float(v) for v in spec.split(",")])


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    records = config_list(cfg, "records")
    refs = config_list(cfg, "refs")
    spec = SweepSpec(
        records=tuple(records),
        refs=tuple(refs),
        gamma_values=_parse_gamma_grid(cfg),
        params=topology_params_from_config(cfg),
        pipeline=PipelineConfig(
            fir=fir_spec_from_config(cfg),
            working_rate=config_float(cfg, "working_rate_hz", 100.0),
            decim=int(cfg["decim"]) if "decim" in cfg else None,
        ),
        eps_ms=config_float(cfg, "eps_ms", 50.0),
        dt_tcr=config_float(cfg, "dt_tcr_s", 1.0),
        seed=config_int(cfg, "seed", 0),
    )
    result = harness.run_sweep(spec)
    harness.write_sweep_csv(result, args.out)
    if args.cells_out:
        _write_cells_csv(result, args.cells_out)
    if result.failures:
        sys.stderr.write(
            json.dumps({"failures": [list(f) for f in result.failures]}) + "\n"
        )
    return 0


def _write_cells_csv(result, path) -> None:
    lines = ["gamma,record,rms_ms,tcr,n_estimates,excluded"]
    for i, gamma in enumerate(result.gamma_values):
        for j, label in enumerate(result.record_labels):
            cell = result.reports[i][j]
            if cell is None:
                continue
            rms = "" if cell.rms_ms is None else f"{cell.rms_ms:.6f}"
            lines.append(
                f"{gamma:.6f},{label},{rms},{cell.tcr:.6f},"
                f"{cell.n_estimates},{cell.excluded}"
            )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topobeat",
        description="Heartbeat-interval estimation from radar displacement "
        "via topology correlation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic IQ record with ground truth")
    p.add_argument("--config", required=True, help="scene config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output IQ CSV")
    p.add_argument("--ref-out", required=True, help="output reference-beat CSV")
    p.add_argument("--displacement-out", default=None, help="optional displacement CSV")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="IQ or raw displacement to filtered displacement CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("extract", help="emit feature points as CSV (tau_s, kind)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("estimate", help="emit interval estimates as CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tc", type=float, default=None, help="ordinary-correlation window (s)")
    p.add_argument("--tt", type=float, default=None, help="topology window (s)")
    p.add_argument("--cth", type=float, default=None)
    p.add_argument("--qth", type=float, default=None)
    p.add_argument("--ibi-min", type=float, default=None)
    p.add_argument("--ibi-max", type=float, default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("eval", help="score estimates against reference beats (JSON)")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--eps-ms", type=float, default=50.0)
    p.add_argument("--dt-tcr", type=float, default=1.0)
    p.add_argument("--t-all", type=float, default=None, help="total time (s); default: last reference beat")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="gamma-grid evaluation over a record cohort")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="aggregate CSV (gamma, rms, tcr)")
    p.add_argument("--cells-out", default=None, help="optional per-cell CSV")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        sys.stderr.write(
            json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
