"""Benchmark harness: detection accuracy on synthetic streams and the
retrain-on-detection loss protocol.

Per seed the harness generates (or loads) a stream, trains a linear learner on
a drift-free prefix, and streams the learner's per-sample losses through every
configured detector.  Seeds are independent work units and may run in worker
processes (capped by ``DRIFTLAB_THREADS``); results are always reduced in seed
order, then detector order.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptation import (
    AdaptConfig,
    CombineMode,
    LossKind,
    ModelKind,
    OnlineModel,
    adapt_on_drift,
    compute_loss,
    train,
)
from .addm import AddmConfig, AddmDetector
from .baselines import BaselineConfig, DetectorKind, Signal, make_baseline
from .errors import BadConfig, BadSpec, DegenerateZero, EmptyGrid, EmptySegment, IoError
from .events import DriftEvent
from .setar import TarConfig, ThresholdMode
from .streams import GeneratorSpec, generate_arrays, ingest_csv, is_regression, records_to_arrays

__all__ = [
    "BenchConfig",
    "BenchReport",
    "DetectorSpec",
    "LearnerSpec",
    "emit_report",
    "match_events",
    "run_loss_protocol",
    "run_synthetic",
    "tune_detector",
]

# Detector kinds that only accept inputs in [0, 1]; their losses are clipped.
_UNIT_INPUT = {DetectorKind.DDM, DetectorKind.EDDM, DetectorKind.HDDM_A, DetectorKind.HDDM_W}
_SYNTHETIC_KINDS = {"oracle", "never", "periodic"}


# -- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class DetectorSpec:
    """One detector to benchmark.

    ``kind`` is ``"addm"``, a baseline kind (``"adwin"``, ``"ddm"``, ...), or
    one of the harness self-test detectors: ``"oracle"`` (fires exactly at
    every true change point), ``"never"`` and ``"periodic"`` (fires every
    ``params["period"]`` samples).  ``retrain`` selects the loss-protocol
    adaptation: ``"scratch"`` or ``"severity"`` (default: severity for
    ``addm``, scratch otherwise).
    """

    id: str
    kind: str
    params: dict = field(default_factory=dict)
    retrain: str | None = None

    def __post_init__(self):
        if self.kind != "addm" and self.kind not in _SYNTHETIC_KINDS:
            try:
                DetectorKind(self.kind)
            except ValueError:
                raise BadConfig(f"unknown detector kind {self.kind!r}") from None
        if self.retrain is None:
            object.__setattr__(self, "retrain", "severity" if self.kind == "addm" else "scratch")
        if self.retrain not in ("scratch", "severity"):
            raise BadConfig(f"retrain must be 'scratch' or 'severity', got {self.retrain!r}")
        if self.kind == "periodic" and int(self.params.get("period", 0)) < 1:
            raise BadConfig("periodic detector needs a positive 'period'")
        # validate eagerly so errors surface before any work is done
        if self.kind == "addm":
            addm_config(self.params)
        elif self.kind not in _SYNTHETIC_KINDS:
            BaselineConfig(self.kind, dict(self.params))

    def to_dict(self):
        return {"id": self.id, "kind": self.kind, "params": dict(self.params), "retrain": self.retrain}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["id"], data["kind"], dict(data.get("params", {})), data.get("retrain"))
        except (KeyError, TypeError) as exc:
            raise BadConfig(f"malformed detector entry: {exc}") from None


_TAR_KEYS = {"p", "d", "min_regime_frac", "significance_level", "bootstrap_reps", "seed", "ci_subsamples", "subsample_exponent"}


def addm_config(params, loss_kind=LossKind.SQUARED, detector_id="addm"):
    """Build an :class:`AddmConfig` from a flat parameter mapping."""
    params = dict(params)
    unknown = set(params) - _TAR_KEYS - {"window", "min_gap", "ci_level", "threshold_mode"}
    if unknown:
        raise BadConfig(f"unknown addm parameter(s): {sorted(unknown)}")
    tar_kwargs = {k: params[k] for k in _TAR_KEYS if k in params}
    tar_kwargs.setdefault("significance_level", 0.01)
    if "threshold_mode" in params:
        tar_kwargs["threshold_mode"] = ThresholdMode(params["threshold_mode"])
    return AddmConfig(
        window=int(params.get("window", 500)),
        tar=TarConfig(**tar_kwargs),
        min_gap=params.get("min_gap"),
        loss_kind=loss_kind,
        detector_id=detector_id,
        ci_level=params.get("ci_level", 0.9),
    )


@dataclass(frozen=True)
class LearnerSpec:
    """Online linear learner; ``kind=None`` picks linear or logistic from the stream."""

    kind: ModelKind | None = None
    learning_rate: float = 0.05
    epochs: int = 5

    def __post_init__(self):
        if self.kind is not None:
            object.__setattr__(self, "kind", ModelKind(self.kind))
        if not self.learning_rate > 0 or self.epochs < 1:
            raise BadConfig("learner needs a positive learning rate and at least one epoch")

    def to_dict(self):
        return {
            "kind": None if self.kind is None else self.kind.value,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
        }


@dataclass(frozen=True)
class CsvSource:
    """A labelled CSV stream (no ground truth drifts)."""

    path: str
    target_column: str = "target"
    task: str = "regression"

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise BadConfig("task must be 'regression' or 'classification'")


@dataclass(frozen=True)
class BenchConfig:
    detectors: tuple
    stream: GeneratorSpec | CsvSource
    learner: LearnerSpec = LearnerSpec()
    match_tolerance: int = 500
    eval_window: int = 500
    seeds: tuple = (0,)
    output_dir: str | None = None
    min_recent: int = 200
    record_timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.match_tolerance <= 0:
            raise BadConfig("match_tolerance must be positive")
        if self.eval_window <= 0:
            raise BadConfig("eval_window must be positive")
        if not self.seeds:
            raise BadConfig("seeds must not be empty")
        if self.min_recent < 1:
            raise BadConfig("min_recent must be positive")
        ids = [d.id for d in self.detectors]
        if len(set(ids)) != len(ids):
            raise BadConfig("detector ids must be unique")

    @classmethod
    def from_dict(cls, data):
        try:
            detectors = [DetectorSpec.from_dict(d) for d in data.get("detectors", [])]
            stream = data["stream"]
            if "csv" in stream:
                source = CsvSource(stream["csv"], stream.get("target_column", "target"), stream.get("task", "regression"))
            else:
                source = GeneratorSpec.from_dict(stream)
            learner = LearnerSpec(**data.get("learner", {}))
            keys = ("match_tolerance", "eval_window", "min_recent")
            extra = {k: int(data[k]) for k in keys if k in data}
            return cls(
                detectors,
                source,
                learner,
                seeds=tuple(data.get("seeds", (0,))),
                output_dir=data.get("output_dir"),
                record_timing=bool(data.get("record_timing", True)),
                **extra,
            )
        except BadSpec:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise BadConfig(f"malformed bench config: {exc}") from None


# -- stream preparation -----------------------------------------------------------


@dataclass
class _Prepared:
    X: np.ndarray
    y: np.ndarray
    drifts: list
    prefix: int
    n_train: int
    model_kind: ModelKind
    model: OnlineModel
    detect_loss: LossKind
    eval_loss: LossKind


def _prefix_length(n, drifts):
    """Drift-free training prefix: 20% of the stream, and at most 80% of the
    stretch before the first drift so detectors see some pre-drift data."""
    cap = int(0.2 * n)
    if drifts:
        cap = min(cap, int(0.8 * drifts[0]))
    return cap


def _prepare(cfg, seed):
    source = cfg.stream
    if isinstance(source, GeneratorSpec):
        spec = GeneratorSpec(source.family, source.n_samples, seed, source.noise_sigma, source.schedule)
        X, y, _, schedule = generate_arrays(spec)
        drifts = list(schedule.change_points)
        regression = is_regression(spec.family)
    else:
        X, y, _ = records_to_arrays(ingest_csv(source.path, target_column=source.target_column))
        drifts = []
        regression = source.task == "regression"
    n = len(y)
    prefix = _prefix_length(n, drifts)
    n_train = int(0.75 * prefix)
    if n_train < 10 or prefix - n_train < 10:
        raise BadConfig(f"stream of {n} samples leaves too short a training prefix ({prefix})")
    head = X[:prefix]
    mu, sd = head.mean(axis=0), head.std(axis=0)
    X = (X - mu) / np.where(sd > 0, sd, 1.0)
    if regression:
        lo, hi = y[:prefix].min(), y[:prefix].max()
        y = (y - lo) / (hi - lo if hi > lo else 1.0)
        kind, detect_loss, eval_loss = ModelKind.LINEAR_REGRESSION, LossKind.SQUARED, LossKind.SQUARED
    else:
        if not np.all((y == 0) | (y == 1)):
            raise BadConfig("classification streams need 0/1 targets")
        kind, detect_loss, eval_loss = ModelKind.LOGISTIC_REGRESSION, LossKind.ZERO_ONE, LossKind.CROSS_ENTROPY
    if cfg.learner.kind is not None and cfg.learner.kind is not kind:
        raise BadConfig(f"learner kind {cfg.learner.kind.value} does not fit this stream")
    model = OnlineModel.zeros(kind, X.shape[1], cfg.learner.learning_rate)
    model = train(model, (X[:n_train], y[:n_train]), cfg.learner.epochs, seed)
    return _Prepared(X, y, drifts, prefix, n_train, kind, model, detect_loss, eval_loss)


# -- detector wrappers ------------------------------------------------------------


class _Stream:
    """Uniform ``observe(index, loss)`` front-end over every detector kind."""

    def __init__(self, spec, loss_kind, validation, start, drifts):
        self.spec = spec
        self.events = []
        self.elapsed = 0.0
        self.addm = None
        self.baseline = None
        if spec.kind == "addm":
            acfg = addm_config(spec.params, loss_kind, spec.id)
            self.addm = AddmDetector(validation[-acfg.window :], acfg, stream_start=start)
        elif spec.kind not in _SYNTHETIC_KINDS:
            self.baseline = make_baseline(BaselineConfig(spec.kind, dict(spec.params)))
            self.clip = self.baseline.kind in _UNIT_INPUT
        self.truth = set(drifts)

    def observe(self, index, loss):
        kind = self.spec.kind
        if kind == "never":
            return None
        if kind == "oracle":
            hit = index in self.truth
            return self._emit(DriftEvent(self.spec.id, index, index)) if hit else None
        if kind == "periodic":
            hit = index > 0 and index % int(self.spec.params["period"]) == 0
            return self._emit(DriftEvent(self.spec.id, index, index)) if hit else None
        started = time.perf_counter()
        if self.addm is not None:
            event = self.addm.observe(loss)
        else:
            value = min(max(loss, 0.0), 1.0) if self.clip else loss
            event = None
            if self.baseline.update(value) is Signal.DRIFT:
                event = DriftEvent(self.spec.id, index, index)
        self.elapsed += time.perf_counter() - started
        return self._emit(event) if event is not None else None

    def _emit(self, event):
        self.events.append(event)
        return event


def match_events(events, drifts, tolerance):
    """Greedy time-ordered matching of alarms to true drifts.

    An event whose alarm time lies in ``[drift, drift + tolerance]`` of the
    earliest still-unmatched drift is a true positive; every other event is a
    false alarm.  Returns ``(tp, fa, delays)`` with delays measured from the
    drift to the event's estimated change location.
    """
    drifts = sorted(drifts)
    matched = [False] * len(drifts)
    tp = fa = 0
    delays = []
    for event in sorted(events, key=lambda e: (e.detected_at_index, e.stream_index, e.detector_id)):
        t = event.detected_at_index
        for k, drift in enumerate(drifts):
            if not matched[k] and drift <= t <= drift + tolerance:
                matched[k] = True
                tp += 1
                delays.append(event.stream_index - drift)
                break
        else:
            fa += 1
    return tp, fa, delays


# -- reports ----------------------------------------------------------------------


@dataclass
class DetectorResult:
    detector_id: str
    tp: int = 0
    fa: int = 0
    mtd_seconds: float = 0.0
    mean_delay_samples: float | None = None
    loss: float | None = None
    nb_retrain: int = 0
    per_seed: list = field(default_factory=list)

    @property
    def n_seeds(self):
        return len(self.per_seed)

    @property
    def tp_mean(self):
        return self.tp / self.n_seeds if self.per_seed else 0.0

    @property
    def fa_mean(self):
        return self.fa / self.n_seeds if self.per_seed else 0.0

    def to_dict(self):
        return {
            "detector_id": self.detector_id,
            "tp": self.tp,
            "fa": self.fa,
            "tp_mean": self.tp_mean,
            "fa_mean": self.fa_mean,
            "mtd_seconds": self.mtd_seconds,
            "mean_delay_samples": self.mean_delay_samples,
            "loss": self.loss,
            "nb_retrain": self.nb_retrain,
            "per_seed": self.per_seed,
        }


@dataclass
class BenchReport:
    protocol: str
    results: list
    truth: dict  # seed -> true change points

    def by_id(self, detector_id):
        for result in self.results:
            if result.detector_id == detector_id:
                return result
        raise KeyError(detector_id)

    def to_dict(self):
        return {
            "protocol": self.protocol,
            "truth": {str(k): v for k, v in self.truth.items()},
            "detectors": [r.to_dict() for r in self.results],
        }


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


# -- synthetic protocol -----------------------------------------------------------


def _detector_losses(prep):
    pred = prep.model.predict(prep.X)
    return compute_loss(prep.detect_loss, prep.y, pred)


def _synthetic_seed(cfg, seed):
    prep = _prepare(cfg, seed)
    losses = _detector_losses(prep)
    validation = losses[prep.n_train : prep.prefix]
    rows = []
    for spec in cfg.detectors:
        stream = _Stream(spec, prep.detect_loss, validation, prep.prefix, prep.drifts)
        for i in range(prep.prefix, len(losses)):
            stream.observe(i, float(losses[i]))
        tp, fa, delays = match_events(stream.events, prep.drifts, cfg.match_tolerance)
        rows.append(
            {
                "seed": seed,
                "tp": tp,
                "fa": fa,
                "n_drifts": len(prep.drifts),
                "mean_delay_samples": _mean(delays),
                "mtd_seconds": stream.elapsed if cfg.record_timing else 0.0,
                "events": [e.to_dict() if cfg.record_timing else _untimed(e) for e in stream.events],
            }
        )
    return seed, prep.drifts, rows


def _untimed(event):
    data = event.to_dict()
    data["compute_time"] = 0.0
    return data


def _workers(n_units):
    cap = os.environ.get("DRIFTLAB_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise BadConfig("DRIFTLAB_THREADS must be an integer") from None
    return max(1, min(limit, n_units))


def _map_seeds(fn, cfg):
    workers = _workers(len(cfg.seeds))
    if workers == 1:
        return [fn(cfg, s) for s in cfg.seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, itertools.repeat(cfg), cfg.seeds))


def _reduce(cfg, protocol, outputs):
    truth = {}
    results = [DetectorResult(spec.id) for spec in cfg.detectors]
    for seed, drifts, rows in outputs:  # already in seed order
        truth[seed] = list(drifts)
        for result, row in zip(results, rows):
            result.per_seed.append(row)
    for result in results:
        seeds = result.per_seed
        result.tp = sum(r.get("tp", 0) for r in seeds)
        result.fa = sum(r.get("fa", 0) for r in seeds)
        result.mtd_seconds = float(np.mean([r["mtd_seconds"] for r in seeds]))
        result.mean_delay_samples = _mean([r.get("mean_delay_samples") for r in seeds])
        result.loss = _mean([r.get("loss") for r in seeds])
        result.nb_retrain = sum(r.get("nb_retrain", 0) for r in seeds)
    return BenchReport(protocol, results, truth)


def run_synthetic(cfg):
    """TP / FA / delay of every detector on seeded synthetic streams."""
    if not isinstance(cfg.stream, GeneratorSpec):
        raise BadConfig("the synthetic protocol needs a generated stream with known drifts")
    report = _reduce(cfg, "synthetic", _map_seeds(_synthetic_seed, cfg))
    if cfg.output_dir:
        emit_report(report, cfg.output_dir)
    return report


# -- loss protocol ----------------------------------------------------------------


def _loss_seed(cfg, seed):
    prep = _prepare(cfg, seed)
    rows = []
    for spec in cfg.detectors:
        rows.append(_loss_run(cfg, prep, spec, seed))
    return seed, prep.drifts, rows


def _loss_run(cfg, prep, spec, seed):
    """Retrain-on-detection run of one detector.

    After an alarm the harness waits until ``min_recent`` samples from the
    event's change location onward are available, retrains (from scratch or by
    severity aggregation), and restarts the detector.  A restarted ADDM first
    collects ``min_recent`` losses of the new model as its reference block.
    """
    X, y, n = prep.X, prep.y, len(prep.y)
    model = prep.model
    pred = model.predict(X[: prep.prefix])
    validation = compute_loss(prep.detect_loss, y[: prep.prefix], pred)[prep.n_train :]
    stream = _Stream(spec, prep.detect_loss, validation, prep.prefix, prep.drifts)
    adapt_cfg = AdaptConfig(
        epochs=cfg.learner.epochs,
        seed=seed,
        combine_mode=CombineMode.WEIGHT_AVERAGE,
        learning_rate=cfg.learner.learning_rate,
        min_recent=cfg.min_recent,
        loss_kind=prep.eval_loss,
    )
    eval_losses = np.empty(n)
    events, deployments = [], []
    elapsed = 0.0
    deployed_at = prep.prefix
    pending = None  # alarm waiting for enough post-change data
    warmup = None  # reference losses being collected for a restarted ADDM
    for i in range(prep.prefix, n):
        pred = model.predict(X[i : i + 1])
        eval_losses[i] = compute_loss(prep.eval_loss, y[i : i + 1], pred)[0]
        loss = float(compute_loss(prep.detect_loss, y[i : i + 1], pred)[0])
        if pending is not None:
            start = pending.stream_index
            if i + 1 - start < cfg.min_recent:
                continue
            recent = (X[start : i + 1], y[start : i + 1])
            model = _retrain(prep, cfg, spec, model, pending, recent, eval_losses[deployed_at:start], adapt_cfg, seed)
            deployed_at = i + 1
            deployments.append(deployed_at)
            pending = None
            if spec.kind == "addm":
                warmup = []
            else:
                stream = _Stream(spec, prep.detect_loss, None, i + 1, prep.drifts)
            continue
        if warmup is not None:
            warmup.append(loss)
            if len(warmup) >= cfg.min_recent:
                stream = _Stream(spec, prep.detect_loss, np.asarray(warmup), i + 1, prep.drifts)
                warmup = None
            continue
        before = stream.elapsed
        event = stream.observe(i, loss)
        elapsed += stream.elapsed - before
        if event is not None:
            events.append(event)
            pending = event
    streamed = eval_losses[prep.prefix :]
    if deployments:
        regions = [eval_losses[d : min(d + cfg.eval_window, n)] for d in deployments if d < n]
        loss = float(np.mean([r.mean() for r in regions])) if regions else float(streamed.mean())
    else:
        loss = float(streamed.mean())
    tp, fa, delays = match_events(events, prep.drifts, cfg.match_tolerance)
    return {
        "seed": seed,
        "tp": tp,
        "fa": fa,
        "n_drifts": len(prep.drifts),
        "mean_delay_samples": _mean(delays),
        "mtd_seconds": elapsed if cfg.record_timing else 0.0,
        "loss": loss,
        "nb_retrain": len(deployments),
        "events": [e.to_dict() if cfg.record_timing else _untimed(e) for e in events],
    }


def _retrain(prep, cfg, spec, model, event, recent, pre_losses, adapt_cfg, seed):
    if spec.retrain == "severity" and pre_losses.size:
        try:
            return adapt_on_drift(model, event, recent, pre_losses[-cfg.eval_window :], adapt_cfg)
        except (DegenerateZero, EmptySegment):
            pass  # no usable severity estimate: fall back to a fresh model
    base = OnlineModel.zeros(prep.model_kind, prep.X.shape[1], cfg.learner.learning_rate)
    return train(base, recent, cfg.learner.epochs, seed)


def run_loss_protocol(cfg):
    """Mean post-retrain loss and retrain count of every detector."""
    report = _reduce(cfg, "loss", _map_seeds(_loss_seed, cfg))
    if cfg.output_dir:
        emit_report(report, cfg.output_dir)
    return report


# -- tuning -----------------------------------------------------------------------


def _grid_points(grid):
    if not grid:
        raise EmptyGrid("parameter grid is empty")
    names = sorted(grid)
    values = [list(grid[name]) for name in names]
    if any(not v for v in values):
        raise EmptyGrid("every grid parameter needs at least one value")
    return [dict(zip(names, combo)) for combo in itertools.product(*values)]


def tune_detector(cfg, kind, grid, experimental_set=None, base_params=None):
    """Grid search for the detector parameters maximising ``TP - FA``.

    Parameters
    ----------
    cfg : BenchConfig
        Supplies the stream, learner, seeds and match tolerance.
    kind : str
        Detector kind to tune.
    grid : dict of str -> list
        Candidate values per parameter; every combination is tried.
    experimental_set : (start, stop), optional
        Stream slice used for tuning; must contain at least one true drift.
        Defaults to the stretch from the end of the training prefix to the
        midpoint between the first and second drift.

    Ties are broken by smaller mean delay, then by grid order.  Returns
    ``(best_params, scores)`` where ``scores`` lists ``(params, tp, fa, delay)``.
    """
    points = _grid_points(grid)
    base_params = dict(base_params or {})
    for point in points:
        DetectorSpec("tune", kind, {**base_params, **point})
    if not isinstance(cfg.stream, GeneratorSpec):
        raise BadConfig("tuning needs a generated stream with known drifts")
    prepared = []
    for seed in cfg.seeds:
        prep = _prepare(cfg, seed)
        losses = _detector_losses(prep)
        if experimental_set is None:
            d = prep.drifts
            stop = (d[0] + d[1]) // 2 if len(d) > 1 else len(losses)
            window = (prep.prefix, stop)
        else:
            window = (max(int(experimental_set[0]), prep.prefix), min(int(experimental_set[1]), len(losses)))
        drifts = [c for c in prep.drifts if window[0] <= c < window[1]]
        if not drifts:
            raise BadConfig("the experimental set contains no true drift")
        prepared.append((prep, losses, window, drifts))
    scores = []
    for point in points:
        spec = DetectorSpec("tune", kind, {**base_params, **point})
        tp = fa = 0
        delays = []
        for prep, losses, (start, stop), drifts in prepared:
            stream = _Stream(spec, prep.detect_loss, losses[prep.n_train : prep.prefix], start, drifts)
            for i in range(start, stop):
                stream.observe(i, float(losses[i]))
            t, f, dl = match_events(stream.events, drifts, cfg.match_tolerance)
            tp, fa = tp + t, fa + f
            delays.extend(dl)
        scores.append((point, tp, fa, _mean(delays)))
    best = min(
        range(len(scores)),
        key=lambda k: (-(scores[k][1] - scores[k][2]), math.inf if scores[k][3] is None else abs(scores[k][3]), k),
    )
    return scores[best][0], scores


# -- output -----------------------------------------------------------------------

_CSV_FIELDS = ["detector_id", "tp", "fa", "tp_mean", "fa_mean", "mtd_seconds", "mean_delay_samples", "loss", "nb_retrain"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report, output_dir, formats=("csv", "json", "plotdata")):
    """Write ``report.csv``, ``report.json`` and ``plotdata.csv`` into ``output_dir``.

    ``plotdata.csv`` has one ``truth`` line per seed (true change points) and
    one line per detector and seed with its alarm indices, space separated.
    Returns the written paths.
    """
    unknown = set(formats) - {"csv", "json", "plotdata"}
    if unknown:
        raise BadConfig(f"unknown report format(s): {sorted(unknown)}")
    out = Path(output_dir)
    paths = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            path = out / "report.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(_CSV_FIELDS)
                for result in report.results:
                    row = result.to_dict()
                    writer.writerow([_fmt(row[k]) for k in _CSV_FIELDS])
            paths.append(path)
        if "json" in formats:
            path = out / "report.json"
            with open(path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
            paths.append(path)
        if "plotdata" in formats:
            path = out / "plotdata.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["series", "seed", "indices"])
                for seed, drifts in report.truth.items():
                    writer.writerow(["truth", seed, " ".join(str(c) for c in drifts)])
                    for result in report.results:
                        row = next((r for r in result.per_seed if r["seed"] == seed), None)
                        if row is not None:
                            idx = " ".join(str(e["detected_at_index"]) for e in row["events"])
                            writer.writerow([result.detector_id, seed, idx])
            paths.append(path)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return paths
