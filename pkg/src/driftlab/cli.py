"""Command-line interface.

Exit codes: 0 on success, 2 for configuration errors (including bad
arguments), 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .addm import detect_offline
from .baselines import BaselineConfig, Signal, make_baseline
from .bench import BenchConfig, addm_config, run_loss_protocol, run_synthetic, tune_detector
from .errors import BadConfig, ConfigError, DataError, IoError, MissingColumn, ParseError
from .events import DriftEvent, write_jsonl
from .streams import DriftSchedule, GeneratorSpec, generate, write_manifest, write_stream_csv

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise BadConfig(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise BadConfig(f"{path} is not valid JSON: {exc}") from None


def _cmd_generate(args):
    schedule = None
    if args.schedule:
        schedule = DriftSchedule.from_dict(_load_json(args.schedule))
    spec = GeneratorSpec(args.family, args.n, args.seed, args.noise, schedule)
    records, manifest = generate(spec)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    write_stream_csv(out / "stream.csv", records)
    write_manifest(out / "manifest.json", manifest)
    print(f"wrote {len(records)} records to {out / 'stream.csv'}")


def _read_losses(path, column):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not rows:
        raise ParseError("input file is empty", row=0)
    header = [h.strip() for h in rows[0]]
    if column not in header:
        raise MissingColumn(f"column {column!r} not found in {path}")
    j = header.index(column)
    values = []
    for i, row in enumerate(rows[1:], start=1):
        try:
            values.append(float(row[j]))
        except (ValueError, IndexError):
            raise ParseError(f"row {i}: cannot read {column!r}", row=i, column=column) from None
    return np.asarray(values)


def _cmd_detect(args):
    params = _load_json(args.config) if args.config else {}
    losses = _read_losses(args.input, args.column)
    if args.detector == "addm":
        loss_kind = params.pop("loss_kind", "squared")
        cfg = addm_config(params, loss_kind)
        events = detect_offline(losses, cfg, args.n_validation)
    else:
        detector = make_baseline(BaselineConfig(args.detector, params))
        events = [
            DriftEvent(args.detector, i, i) for i, v in enumerate(losses) if detector.update(v) is Signal.DRIFT
        ]
    try:
        with open(args.events_out, "w") as fh:
            write_jsonl(events, fh)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    print(f"{len(events)} event(s) written to {args.events_out}")


def _bench_config(path, out):
    data = _load_json(path)
    if out:
        data["output_dir"] = out
    return BenchConfig.from_dict(data)


def _cmd_bench(args):
    cfg = _bench_config(args.config, args.out)
    report = run_synthetic(cfg) if args.protocol == "synthetic" else run_loss_protocol(cfg)
    if not cfg.output_dir:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    for result in report.results:
        print(f"{result.detector_id}: tp={result.tp} fa={result.fa} nb_retrain={result.nb_retrain}", file=sys.stderr)


def _cmd_tune(args):
    cfg = _bench_config(args.input, None)
    grid = _load_json(args.grid)
    if not isinstance(grid, dict):
        raise BadConfig("grid must be a JSON object mapping parameter names to value lists")
    window = tuple(args.experimental_set) if args.experimental_set else None
    best, scores = tune_detector(cfg, args.detector, grid, window)
    json.dump({"best": best, "scores": [[p, tp, fa, d] for p, tp, fa, d in scores]}, sys.stdout, indent=2)
    sys.stdout.write("\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="driftlab", description="Concept drift detection toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic drifting stream")
    gen.add_argument("--family", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=float, default=None)
    gen.add_argument("--schedule", help="JSON drift schedule (default: evenly spaced drifts)")
    gen.add_argument("--out", required=True, help="output directory for stream.csv and manifest.json")
    gen.set_defaults(func=_cmd_generate)

    det = sub.add_parser("detect", help="run one detector over a loss series")
    det.add_argument("--detector", required=True)
    det.add_argument("--config", help="JSON file of detector parameters")
    det.add_argument("--input", required=True, help="CSV with a loss column")
    det.add_argument("--column", default="loss")
    det.add_argument("--n-validation", type=int, default=None, help="addm reference length (default: window)")
    det.add_argument("--events-out", required=True)
    det.set_defaults(func=_cmd_detect)

    bench = sub.add_parser("bench", help="run a benchmark protocol")
    bench.add_argument("protocol", choices=["synthetic", "loss"])
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", default=None)
    bench.set_defaults(func=_cmd_bench)

    tune = sub.add_parser("tune", help="grid-search detector parameters")
    tune.add_argument("--detector", required=True)
    tune.add_argument("--grid", required=True)
    tune.add_argument("--input", required=True, help="bench config JSON describing the stream")
    tune.add_argument("--experimental-set", type=int, nargs=2, metavar=("START", "STOP"))
    tune.set_defaults(func=_cmd_tune)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
