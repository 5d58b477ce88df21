"""Command-line surface: simulate, deviation analysis, training, online IDS, evaluation.

Every command is batch and deterministic for fixed seeds; figure data is
emitted as CSV for external plotting. Exit codes: 0 ok, 2 config error,
3 data error, 4 threshold gate failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import classifier as clf
from .engine import (
    Decision,
    IdsConfig,
    IdsEngine,
    ThresholdConfig,
    evaluate,
    fuse,
    truth_from_frames,
)
from .errors import (
    CanfpError,
    ConfigParseError,
    DimensionMismatchError,
    InsufficientFramesError,
    SeqMismatchError,
)
from .features import compute_features
from .preprocessing import (
    GroupConfig,
    deviation_series,
    deviation_statistics,
    downsample,
    extract_groups,
    temperature_correlation,
)
from .simulator import load_scenario, run_scenario
from .trace_io import read_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_GATE = 4

PRESET_DIR = Path(__file__).resolve().parent / "presets"


def default_out_dir() -> Path:
    return Path(os.environ.get("CANFP_OUT_DIR", "."))


def resolve_config_path(name: str) -> Path:
    """Accept a filesystem path or the name of a bundled preset."""
    path = Path(name)
    if path.exists():
        return path
    preset = PRESET_DIR / f"{name}.json"
    if preset.exists():
        return preset
    raise ConfigParseError(f"no such config file or preset: {name}")


def featurize_frames(frames, group_config: GroupConfig = GroupConfig()):
    feats = np.empty((len(frames), 39))
    for i, frame in enumerate(frames):
        feats[i] = compute_features(extract_groups(frame, group_config))
    return feats


def cmd_simulate(args) -> int:
    config = load_scenario(resolve_config_path(args.config))
    out_dir = Path(args.out) if args.out else default_out_dir()
    paths = run_scenario(config, out_dir)
    manifest = {
        "scenario": config.name,
        "seed": config.rng_seed,
        "config_hash": config.config_hash(),
        "traces": [p.name for p in paths],
    }
    manifest_path = out_dir / f"{config.name}_manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for p in paths:
        print(f"trace: {p}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def cmd_deviation(args) -> int:
    header, frames = read_trace(args.trace)
    if args.downsample > 1:
        spb = int(round(header.sample_rate / header.bit_rate))
        if spb % args.downsample != 0:
            raise ConfigParseError(
                f"downsample factor {args.downsample} does not divide {spb} samples/bit"
            )
        from .signal_model import frame_with

        frames = [
            frame_with(
                f,
                samples=downsample(f.samples, args.downsample),
                sample_rate=f.sample_rate / args.downsample,
            )
            for f in frames
        ]
    series = deviation_series(frames, group=args.group, m_count=args.m_count)
    out_dir = Path(args.out) if args.out else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    series_path = out_dir / f"deviation_g{args.group}.csv"
    with open(series_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_seq", "ecu", "g", "sd", "temperature_c", "trip"])
        for ecu in sorted(series):
            for p in series[ecu]:
                writer.writerow([p.seq, p.ecu, p.group, repr(p.sd), p.temperature_c, p.trip])

    stats = deviation_statistics(series)
    temp_corr = temperature_correlation(series)
    stats_path = out_dir / f"deviation_stats_g{args.group}.csv"
    with open(stats_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ecu", "mean", "std", "max", "max_diff", "temp_corr"])
        for e in stats.ecus:
            writer.writerow(
                [e, stats.mean[e], stats.std[e], stats.maximum[e], stats.max_diff[e], temp_corr[e]]
            )
        writer.writerow([])
        writer.writerow(["correlation"] + [f"ecu{e}" for e in stats.ecus])
        for i, e in enumerate(stats.ecus):
            writer.writerow([f"ecu{e}"] + [repr(v) for v in stats.correlation[i]])

    print(f"series: {series_path}")
    print(f"stats: {stats_path}")
    for e in stats.ecus:
        print(
            f"ecu {e}: mean {stats.mean[e]:.5f} std {stats.std[e]:.5f} "
            f"max {stats.maximum[e]:.5f} max_diff {stats.max_diff[e]:.5f} "
            f"temp_corr {temp_corr[e]:.4f}"
        )
    return EXIT_OK


def _training_rows(frames, n_per_ecu, selection, seed):
    """Indices of training frames: attack frames are excluded by ground truth."""
    ecus = sorted({f.true_ecu for f in frames})
    if selection == "first":
        picks, count = [], {e: 0 for e in ecus}
        for i, f in enumerate(frames):
            if f.attack:
                continue
            if count[f.true_ecu] < n_per_ecu:
                picks.append(i)
                count[f.true_ecu] += 1
        short = [e for e, c in count.items() if c < n_per_ecu]
    else:
        rng = np.random.default_rng(seed)
        picks = []
        short = []
        for e in ecus:
            pool = [i for i, f in enumerate(frames) if f.true_ecu == e and not f.attack]
            if len(pool) < n_per_ecu:
                short.append(e)
                continue
            picks.extend(rng.choice(pool, size=n_per_ecu, replace=False))
        picks = sorted(int(i) for i in picks)
    if short:
        raise InsufficientFramesError(
            f"not enough clean frames for ECUs {short} (need {n_per_ecu} each)"
        )
    return np.asarray(picks)


def cmd_train(args) -> int:
    header, frames = read_trace(args.trace)
    picks = _training_rows(frames, args.n_per_ecu, args.selection, args.seed)
    feats = featurize_frames([frames[i] for i in picks])
    labels = [frames[i].true_ecu for i in picks]
    seqs = [frames[i].seq for i in picks]
    model = clf.train(
        feats,
        labels,
        training_seqs=seqs,
        trace_config_hash=header.config_hash,
    )
    clf.save_model(model, args.model)
    reference = {e: round(v, 4) for e, v in sorted(model.reference_confidence.items())}
    print(f"model: {args.model}")
    print(f"trained on {len(picks)} frames ({args.selection}); reference confidence {reference}")
    return EXIT_OK


def _write_verdicts(path, verdicts, events, updates):
    with open(path, "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(
                json.dumps(
                    {
                        "type": "verdict",
                        "seq": v.seq,
                        "predicted": v.predicted,
                        "decision": v.decision.value,
                        "authorized_ecu": v.authorized_ecu,
                        "p_authorized": v.p_authorized,
                        "max_other": v.max_other,
                        "probabilities": list(v.probabilities) if v.probabilities else None,
                        "annotation": v.annotation,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
        for e in events:
            fh.write(
                json.dumps(
                    {"type": "drift", "seq": e.seq, "ecu": e.ecu, "ewma": e.ewma, "kind": e.kind.value},
                    separators=(",", ":"),
                )
                + "\n"
            )
        for u in updates:
            fh.write(json.dumps({"type": "update", **u}, separators=(",", ":")) + "\n")


def _write_metrics(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "seq",
                "cum_identification",
                "cum_tp",
                "cum_tn",
                "cum_confidence",
                "roll_identification",
                "roll_tp",
                "roll_tn",
                "roll_confidence",
                "fp_count",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r.seq,
                    repr(r.cum_identification),
                    repr(r.cum_tp),
                    repr(r.cum_tn),
                    repr(r.cum_confidence),
                    repr(r.roll_identification),
                    repr(r.roll_tp),
                    repr(r.roll_tn),
                    repr(r.roll_confidence),
                    r.fp_count,
                ]
            )


def _print_summary(tag, summary):
    tp = "nan" if math.isnan(summary.tp_rate) else f"{summary.tp_rate:.4f}"
    print(
        f"{tag}: frames {summary.n_frames} attacks {summary.n_attacks} "
        f"identification {summary.identification_rate:.4f} tp {tp} "
        f"tn {summary.tn_rate:.4f} fp {summary.fp_count} fn {summary.fn_count} "
        f"confidence {summary.mean_confidence:.4f}"
    )


def _run_one(trace_path, model, thresholds, update, out_dir, tag):
    header, frames = read_trace(trace_path)
    if model.trace_config_hash and header.config_hash and model.trace_config_hash != header.config_hash:
        raise DimensionMismatchError(
            f"model was trained on config {model.trace_config_hash}, trace is {header.config_hash}"
        )
    config = IdsConfig(thresholds=thresholds, enable_updates=update)
    engine = IdsEngine(
        model,
        header.authorization,
        config,
        bytes.fromhex(header.mac_key) if header.mac_key else None,
    )
    training = set(model.training_seqs)
    verdicts, truths = [], []
    for frame in frames:
        if frame.seq in training:
            continue
        verdicts.append(engine.process_frame(frame))
        truths.append(frame)
    rows, summary = evaluate(verdicts, truth_from_frames(truths))
    verdict_path = out_dir / f"verdicts_{tag}.jsonl"
    metrics_path = out_dir / f"metrics_{tag}.csv"
    _write_verdicts(verdict_path, verdicts, engine.drift_events, engine.update_log)
    _write_metrics(metrics_path, rows)
    print(f"verdicts: {verdict_path}")
    print(f"metrics: {metrics_path}")
    _print_summary(tag, summary)
    return verdicts, truths, summary


def cmd_run(args) -> int:
    model = clf.load_model(args.model)
    thresholds = ThresholdConfig(t_low=args.t_low, t_high=args.t_high)
    out_dir = Path(args.out) if args.out else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.fuse:
        if len(args.trace) != 2:
            raise ConfigParseError("--fuse needs exactly two traces")
        model_b = clf.load_model(args.fuse_model) if args.fuse_model else model
        va, ta, _ = _run_one(args.trace[0], model, thresholds, args.update, out_dir, "a")
        vb, tb, _ = _run_one(args.trace[1], model_b, thresholds, args.update, out_dir, "b")
        if len(va) != len(vb):
            raise SeqMismatchError(f"channel lengths differ: {len(va)} vs {len(vb)}")
        fused_path = out_dir / "verdicts_fused.jsonl"
        n_attacks = flagged = 0
        with open(fused_path, "w", encoding="utf-8") as fh:
            for a, b, truth in zip(va, vb, ta):
                decision = fuse(a, b)
                fh.write(
                    json.dumps(
                        {"type": "fused", "seq": a.seq, "decision": decision.value},
                        separators=(",", ":"),
                    )
                    + "\n"
                )
                if truth.attack:
                    n_attacks += 1
                    flagged += decision == Decision.INTRUSION
        fused_tp = flagged / n_attacks if n_attacks else float("nan")
        print(f"fused verdicts: {fused_path}")
        print(f"fused: attacks {n_attacks} tp {fused_tp:.4f}")
        return EXIT_OK

    if len(args.trace) != 1:
        raise ConfigParseError("exactly one trace expected (or two with --fuse)")
    _run_one(args.trace[0], model, thresholds, args.update, out_dir, "run")
    return EXIT_OK


def _read_verdict_log(path):
    verdicts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if obj.get("type") != "verdict":
                continue
            verdicts.append(obj)
    return verdicts


def cmd_eval(args) -> int:
    from .engine import Verdict

    raw = _read_verdict_log(args.verdicts)
    header, frames = read_trace(args.truth)
    by_seq = {f.seq: f for f in frames}
    verdicts, truths = [], []
    for obj in raw:
        frame = by_seq.get(obj["seq"])
        if frame is None:
            raise SeqMismatchError(f"verdict seq {obj['seq']} missing from ground truth")
        verdicts.append(
            Verdict(
                seq=obj["seq"],
                predicted=obj["predicted"],
                probabilities=tuple(obj["probabilities"]) if obj["probabilities"] else None,
                decision=Decision(obj["decision"]),
                authorized_ecu=obj["authorized_ecu"],
                p_authorized=obj["p_authorized"],
                max_other=obj["max_other"],
                annotation=obj.get("annotation"),
            )
        )
        truths.append(frame)
    rows, summary = evaluate(verdicts, truth_from_frames(truths))
    out_dir = Path(args.out) if args.out else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "eval_metrics.csv"
    _write_metrics(metrics_path, rows)
    print(f"metrics: {metrics_path}")
    _print_summary("eval", summary)

    gate_failed = False
    if args.min_identification is not None and summary.identification_rate < args.min_identification:
        print(f"GATE: identification {summary.identification_rate:.4f} < {args.min_identification}")
        gate_failed = True
    if args.min_tp is not None and not (summary.tp_rate >= args.min_tp):
        print(f"GATE: tp {summary.tp_rate:.4f} < {args.min_tp}")
        gate_failed = True
    if args.max_fp is not None and summary.fp_count > args.max_fp:
        print(f"GATE: fp {summary.fp_count} > {args.max_fp}")
        gate_failed = True
    return EXIT_GATE if gate_failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canfp",
        description="CAN physical-layer sender identification toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write trace files")
    p.add_argument("config", help="scenario JSON path or bundled preset name")
    p.add_argument("--out", help="output directory (default $CANFP_OUT_DIR or .)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("deviation", help="signal-deviation series and statistics")
    p.add_argument("trace")
    p.add_argument("--group", "-g", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--m-count", "-m", type=int, default=20, help="frames per ECU for templates")
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("train", help="fit a fingerprint model from a trace")
    p.add_argument("trace")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--n-per-ecu", type=int, default=200)
    p.add_argument("--selection", choices=("first", "random"), default="first")
    p.add_argument("--seed", type=int, default=0, help="seed for random selection")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="stream a trace through the online IDS")
    p.add_argument("trace", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--update", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--fuse", action="store_true", help="two traces, fused verdicts")
    p.add_argument("--fuse-model", help="model for the second trace (defaults to --model)")
    p.add_argument("--t-low", type=float, default=0.2)
    p.add_argument("--t-high", type=float, default=0.8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="metrics from a verdict log plus ground truth")
    p.add_argument("verdicts")
    p.add_argument("truth", help="trace file carrying ground truth")
    p.add_argument("--out")
    p.add_argument("--min-identification", type=float)
    p.add_argument("--min-tp", type=float)
    p.add_argument("--max-fp", type=int)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CanfpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
