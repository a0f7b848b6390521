"""Streaming drift detector built on the two-regime threshold AR fit.

The detector keeps a reference block of losses (initially validation errors)
and a sliding window of streamed losses.  Every ``window // 4`` samples it fits
a time-indexed threshold AR model to ``reference + window``; a significant
split that lands inside the streamed part is reported as a drift, after which
the post-drift part of the window becomes the new reference.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adaptation import LossKind, severity
from .errors import (
    BadParam,
    DegenerateZero,
    DomainError,
    EmptySegment,
    NoAdmissibleSplit,
    NonFiniteValue,
    SeriesTooShort,
)
from .events import DriftEvent
from .setar import (
    ErrorSeries,
    TarConfig,
    build_lag_design,
    fit_tar,
    min_series_length,
    significance_test,
    subsample_ci,
)

__all__ = ["AddmConfig", "AddmDetector", "DetectorState", "detect_offline"]


@dataclass(frozen=True)
class AddmConfig:
    """Settings for :class:`AddmDetector`.

    ``min_gap`` defaults to ``window``; ``ci_level=None`` skips the threshold
    confidence interval.
    """

    window: int = 500
    tar: TarConfig = field(default_factory=lambda: TarConfig(significance_level=0.01))
    min_gap: int | None = None
    loss_kind: LossKind = LossKind.SQUARED
    detector_id: str = "addm"
    ci_level: float | None = 0.9

    def __post_init__(self):
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        if self.min_gap is None:
            object.__setattr__(self, "min_gap", self.window)
        if self.window < min_series_length(self.tar):
            raise BadParam(f"window must be at least {min_series_length(self.tar)}")
        if self.min_gap < 1:
            raise BadParam("min_gap must be >= 1")
        if self.ci_level is not None and not 0.0 < self.ci_level < 1.0:
            raise BadParam("ci_level must lie in (0, 1)")

    @property
    def cadence(self):
        return max(1, self.window // 4)


@dataclass
class DetectorState:
    validation_errors: np.ndarray
    window_errors: deque
    samples_seen: int = 0
    last_detection: int | None = None
    stream_start: int = 0
    window_start: int = 0
    last_event_index: int | None = None
    pending_time: float = 0.0


class AddmDetector:
    """Threshold-AR drift detector over a stream of per-sample losses.

    Parameters
    ----------
    validation_errors : array-like
        Losses of the deployed model on held-out data from the training concept.
    cfg : AddmConfig
    stream_start : int
        Stream index of the first loss passed to :meth:`observe`.
    """

    def __init__(self, validation_errors, cfg=None, stream_start=0):
        cfg = AddmConfig() if cfg is None else cfg
        values = ErrorSeries(validation_errors).values
        if values.size < min_series_length(cfg.tar):
            raise SeriesTooShort(
                f"need at least {min_series_length(cfg.tar)} validation errors, got {values.size}"
            )
        self.cfg = cfg
        self.state = DetectorState(
            validation_errors=values.copy(),
            window_errors=deque(maxlen=cfg.window),
            stream_start=int(stream_start),
            window_start=int(stream_start),
        )

    @property
    def detector_id(self):
        return self.cfg.detector_id

    def observe(self, loss):
        """Feed one loss; returns a :class:`DriftEvent` or ``None``."""
        loss = float(loss)
        if not math.isfinite(loss):
            raise NonFiniteValue("loss must be finite")
        if loss < 0 and self.cfg.loss_kind is not LossKind.ZERO_ONE:
            raise DomainError("loss must be non-negative")
        started = time.perf_counter()
        st = self.state
        index = st.stream_start + st.samples_seen
        st.window_errors.append(loss)
        st.window_start = index - len(st.window_errors) + 1
        st.samples_seen += 1

        event = None
        cadence = self.cfg.cadence
        gap_ok = st.last_detection is None or st.samples_seen - st.last_detection >= self.cfg.min_gap
        if st.samples_seen % cadence == 0 and gap_ok and len(st.window_errors) >= cadence:
            event = self._check(index)
        st.pending_time += time.perf_counter() - started
        if event is not None:
            event.compute_time = st.pending_time
            st.pending_time = 0.0
        return event

    def _check(self, index):
        st, cfg = self.state, self.cfg
        tar = cfg.tar
        n_val = st.validation_errors.size
        series = ErrorSeries(np.concatenate([st.validation_errors, np.fromiter(st.window_errors, float)]))
        if len(series) < min_series_length(tar):
            return None
        try:
            fit = fit_tar(series, tar, test=False)
        except (NoAdmissibleSplit, SeriesTooShort):
            return None
        split = fit.threshold_index
        if split < n_val:
            return None
        # offset maps series positions to stream indices
        offset = st.window_start - n_val
        stream_index = split + offset
        if st.last_event_index is not None and stream_index - st.last_event_index < cfg.min_gap:
            return None
        seed = int(np.random.SeedSequence([tar.seed, st.samples_seen]).generate_state(1)[0])
        p_value = significance_test(fit, build_lag_design(series, tar), tar, seed=seed)
        if p_value > tar.significance_level:
            return None

        ci = None
        if cfg.ci_level is not None:
            try:
                raw = subsample_ci(series, tar, fit, cfg.ci_level)
            except SeriesTooShort:
                raw = None
            if raw is not None:
                shift = offset if tar.threshold_mode.value == "time_index" else 0.0
                ci = type(raw)(raw.lower + shift, raw.upper + shift, raw.nominal_level, raw.subsample_size, raw.n_subsamples)
        sev = None
        values = series.values
        try:
            sev = severity(values[:split], values[split:]).w
        except (EmptySegment, DegenerateZero, DomainError):
            pass

        event = DriftEvent(
            detector_id=cfg.detector_id,
            stream_index=int(stream_index),
            detected_at_index=int(index),
            severity=sev,
            ci=ci,
            p_value=p_value,
        )
        # The split estimate can land a little before the true change; keeping
        # only the later half of the post-split segment stops those pre-change
        # losses from contaminating the new reference.
        post = values[split:]
        half = post[post.size // 2 :]
        st.validation_errors = (half if half.size >= min_series_length(tar) else post).copy()
        st.window_errors.clear()
        st.window_start = index + 1
        st.last_detection = st.samples_seen
        st.last_event_index = int(stream_index)
        return event

    def run(self, losses):
        events = []
        for loss in losses:
            event = self.observe(loss)
            if event is not None:
                events.append(event)
        return events


def detect_offline(errors, cfg=None, n_validation=None):
    """Run the streaming detector over a stored error series.

    The first ``n_validation`` values (default ``cfg.window``) seed the
    reference block; the rest are streamed through :meth:`AddmDetector.observe`.
    """
    cfg = AddmConfig() if cfg is None else cfg
    if not isinstance(errors, ErrorSeries):
        errors = ErrorSeries(errors)
    n_val = cfg.window if n_validation is None else int(n_validation)
    if n_val < 0:
        raise BadParam("n_validation must be non-negative")
    if len(errors) <= n_val:
        return []
    values = errors.values
    detector = AddmDetector(values[:n_val], cfg, stream_start=errors.start_index + n_val)
    return detector.run(values[n_val:])
