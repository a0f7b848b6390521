"""Reference change detectors used as comparison baselines.

Every detector consumes one real value per step (usually a per-sample loss)
and answers with a :class:`Signal`.  All of them share the same small
interface (``update``, ``reset``, ``n_seen``) so the benchmark harness can
drive them interchangeably with the threshold-AR detector.

Implemented families:

* ``adwin``        -- adaptive window over an exponential histogram (M = 5).
* ``ddm``          -- error-rate control chart with warning/drift levels.
* ``eddm``         -- distance-between-errors control chart.
* ``page_hinkley`` -- cumulative deviation test with forgetting.
* ``kswin``        -- sliding-window Kolmogorov-Smirnov test.
* ``hddm_a``       -- Hoeffding-bound test on running averages.
* ``hddm_w``       -- McDiarmid-bound test on EWMA estimates.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from .errors import BadParam, DomainError, MissingParam, NonFiniteValue

__all__ = [
    "Adwin",
    "BaselineConfig",
    "Ddm",
    "DetectorKind",
    "Eddm",
    "HddmA",
    "HddmW",
    "Kswin",
    "PageHinkley",
    "Signal",
    "baseline_observe",
    "make_baseline",
]


class Signal(str, enum.Enum):
    NONE = "none"
    WARNING = "warning"
    DRIFT = "drift"


class DetectorKind(str, enum.Enum):
    ADWIN = "adwin"
    DDM = "ddm"
    EDDM = "eddm"
    PAGE_HINKLEY = "page_hinkley"
    KSWIN = "kswin"
    HDDM_A = "hddm_a"
    HDDM_W = "hddm_w"


# ``None`` marks a parameter that has no sensible universal default and must
# be supplied (these are the per-dataset tuned values).
_PARAMS = {
    DetectorKind.ADWIN: {"delta": None},
    DetectorKind.DDM: {"warn_k": 2.0, "drift_k": 3.0, "min_samples": 30},
    DetectorKind.EDDM: {"beta_warn": 0.95, "beta_drift": 0.9, "min_errors": 30},
    DetectorKind.PAGE_HINKLEY: {"lambda": None, "delta_ph": 0.005, "alpha_forget": 0.9999, "min_samples": 30},
    DetectorKind.KSWIN: {"alpha": None, "window_size": 100, "stat_size": 30, "seed": 0},
    DetectorKind.HDDM_A: {"drift_confidence": 0.001, "warn_confidence": 0.005, "two_sided": True},
    DetectorKind.HDDM_W: {
        "drift_confidence": 0.001,
        "warn_confidence": 0.005,
        "lambda_ewma": 0.05,
        "two_sided": True,
    },
}

_UNIT_OPEN = {"delta", "alpha", "alpha_forget", "drift_confidence", "warn_confidence", "lambda_ewma"}
_UNIT_OPEN |= {"beta_warn", "beta_drift"}
_POSITIVE_INT = {"min_samples", "min_errors", "window_size", "stat_size"}


@dataclass(frozen=True)
class BaselineConfig:
    """Detector family plus named parameters; unspecified ones take defaults."""

    kind: DetectorKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            kind = DetectorKind(self.kind)
        except ValueError:
            raise BadParam(f"unknown detector kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        defaults = _PARAMS[kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise BadParam(f"unknown {kind.value} parameter(s): {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.params)
        missing = sorted(k for k, v in merged.items() if v is None)
        if missing:
            raise MissingParam(f"{kind.value} needs parameter(s) {missing}")
        for name, value in merged.items():
            _check_param(name, value)
        if kind is DetectorKind.KSWIN and merged["stat_size"] >= merged["window_size"]:
            raise BadParam("kswin stat_size must be smaller than window_size")
        if kind in (DetectorKind.HDDM_A, DetectorKind.HDDM_W) and merged["warn_confidence"] < merged["drift_confidence"]:
            raise BadParam("warn_confidence must be >= drift_confidence")
        object.__setattr__(self, "params", merged)


def _check_param(name, value):
    if name in ("two_sided",):
        if not isinstance(value, bool):
            raise BadParam(f"{name} must be a boolean")
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise BadParam(f"{name} must be a finite number")
    if name in _UNIT_OPEN and not 0.0 < value < 1.0:
        raise BadParam(f"{name} must lie in (0, 1), got {value}")
    if name in _POSITIVE_INT and (int(value) != value or value < 1):
        raise BadParam(f"{name} must be a positive integer, got {value}")
    if name in ("warn_k", "drift_k", "lambda") and value <= 0:
        raise BadParam(f"{name} must be positive, got {value}")
    if name == "delta_ph" and value < 0:
        raise BadParam("delta_ph must be non-negative")
    if name == "seed" and (int(value) != value or value < 0):
        raise BadParam("seed must be a non-negative integer")


def _finite(value):
    value = float(value)
    if not math.isfinite(value):
        raise NonFiniteValue("detector input must be finite")
    return value


def _unit(value):
    value = _finite(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"input must lie in [0, 1], got {value}")
    return value


class _Detector:
    kind: DetectorKind

    def __init__(self, cfg):
        self.cfg = cfg
        self.params = cfg.params
        self.n_seen = 0
        self.reset()

    def reset(self):
        """Forget all statistics (``n_seen`` counts every sample ever fed)."""
        raise NotImplementedError

    def update(self, value):
        raise NotImplementedError


# -- ADWIN ----------------------------------------------------------------------


class Adwin(_Detector):
    """Adaptive windowing with an exponential histogram of bucket rows.

    Row ``i`` holds buckets summarising ``2**i`` samples each (total and
    sum of squared deviations); a row overflowing ``M`` buckets merges its two
    oldest into the next row.  Every ``clock`` samples all bucket boundaries
    are tested and the oldest buckets dropped while some split of the window
    shows a mean difference above the Bernstein-type cut.
    """

    kind = DetectorKind.ADWIN
    M = 5
    clock = 32
    min_sub_window = 5

    def reset(self):
        self.rows = []  # rows[i]: deque of [total, variance], newest on the right
        self.width = 0
        self.total = 0.0
        self.variance = 0.0
        self._tick = 0

    @property
    def n_buckets(self):
        return sum(len(row) for row in self.rows)

    @property
    def mean(self):
        return self.total / self.width if self.width else 0.0

    def update(self, value):
        value = _finite(value)
        self.n_seen += 1
        self._insert(value)
        self._tick += 1
        if self._tick % self.clock == 0 and self.width > 2 * self.min_sub_window:
            if self._shrink():
                return Signal.DRIFT
        return Signal.NONE

    def _insert(self, value):
        if self.width:
            mean = self.total / self.width
            self.variance += self.width * (value - mean) ** 2 / (self.width + 1)
        self.width += 1
        self.total += value
        if not self.rows:
            self.rows.append(deque())
        self.rows[0].append([value, 0.0])
        level = 0
        while len(self.rows[level]) > self.M:
            size = 2**level
            t1, v1 = self.rows[level].popleft()
            t2, v2 = self.rows[level].popleft()
            diff = t1 / size - t2 / size
            merged = [t1 + t2, v1 + v2 + size * size * diff * diff / (2 * size)]
            if level + 1 == len(self.rows):
                self.rows.append(deque())
            self.rows[level + 1].append(merged)
            level += 1

    def _drop_oldest(self):
        level = len(self.rows) - 1
        total, var = self.rows[level].popleft()
        size = 2**level
        self.width -= size
        self.total -= total
        if self.width:
            diff = total / size - self.total / self.width
            self.variance -= var + size * self.width * diff * diff / (size + self.width)
            self.variance = max(self.variance, 0.0)
        else:
            self.variance = 0.0
        if not self.rows[level]:
            self.rows.pop()

    def _cut(self, n0, n1, u0, u1):
        delta = self.params["delta"]
        n = self.width
        v = self.variance / n
        dd = math.log(2.0 * math.log(n) / delta)
        m = 1.0 / (n0 - self.min_sub_window + 1) + 1.0 / (n1 - self.min_sub_window + 1)
        eps = math.sqrt(2.0 * m * v * dd) + 2.0 / 3.0 * dd * m
        return abs(u0 - u1) > eps

    def _shrink(self):
        changed = False
        while True:
            n0, t0 = 0, 0.0
            cut = False
            # walk bucket boundaries from the oldest data to the newest
            for level in range(len(self.rows) - 1, -1, -1):
                size = 2**level
                for total, _ in self.rows[level]:
                    n0 += size
                    t0 += total
                    n1 = self.width - n0
                    if n1 < self.min_sub_window:
                        break
                    if n0 >= self.min_sub_window and self._cut(n0, n1, t0 / n0, (self.total - t0) / n1):
                        cut = True
                        break
                if cut:
                    break
            if not cut or self.width <= 2 * self.min_sub_window:
                return changed
            self._drop_oldest()
            changed = True


# -- DDM / EDDM -----------------------------------------------------------------


class Ddm(_Detector):
    """Control chart on the running error rate ``p`` and its deviation ``s``."""

    kind = DetectorKind.DDM

    def reset(self):
        self.n = 0
        self.p = 0.0
        self.s = 0.0
        self.ps_min = math.inf
        self.p_min = math.inf
        self.s_min = math.inf

    def update(self, value):
        value = _unit(value)
        self.n_seen += 1
        self.n += 1
        self.p += (value - self.p) / self.n
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.n)
        if self.n < self.params["min_samples"]:
            return Signal.NONE
        if self.p + self.s <= self.ps_min:
            self.p_min, self.s_min = self.p, self.s
            self.ps_min = self.p + self.s
        level = self.p + self.s
        if level > self.p_min + self.params["drift_k"] * self.s_min:
            self.reset()
            return Signal.DRIFT
        if level > self.p_min + self.params["warn_k"] * self.s_min:
            return Signal.WARNING
        return Signal.NONE


class Eddm(_Detector):
    """Monitors the mean and spread of the distance between consecutive errors.

    Inputs ``>= 0.5`` count as errors.  After ``min_errors`` errors the ratio
    ``(m + 2 s) / max(m + 2 s)`` is compared with ``beta_warn`` and
    ``beta_drift``.
    """

    kind = DetectorKind.EDDM

    def reset(self):
        self.n = 0
        self.n_errors = 0
        self.last_error = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m2s_max = 0.0

    def update(self, value):
        value = _unit(value)
        self.n_seen += 1
        self.n += 1
        if value < 0.5:
            return Signal.NONE
        self.n_errors += 1
        distance = self.n - self.last_error
        self.last_error = self.n
        old_mean = self.mean
        self.mean += (distance - self.mean) / self.n_errors
        self.m2 += (distance - old_mean) * (distance - self.mean)
        std = math.sqrt(self.m2 / self.n_errors)
        m2s = self.mean + 2.0 * std
        if m2s > self.m2s_max:
            self.m2s_max = m2s
        if self.n_errors < self.params["min_errors"]:
            return Signal.NONE
        ratio = m2s / self.m2s_max
        if ratio < self.params["beta_drift"]:
            self.reset()
            return Signal.DRIFT
        if ratio < self.params["beta_warn"]:
            return Signal.WARNING
        return Signal.NONE


# -- Page-Hinkley ---------------------------------------------------------------


class PageHinkley(_Detector):
    """Upward Page-Hinkley test with a forgetting factor.

    ``m_t = alpha * m_{t-1} + (x_t - mean_t - delta_ph)``; the statistic is
    ``m_t - min_s m_s`` and a drift is raised when it exceeds ``lambda``.
    """

    kind = DetectorKind.PAGE_HINKLEY

    def reset(self):
        self.n = 0
        self.x_mean = 0.0
        self.cum = 0.0
        self.cum_min = 0.0

    @property
    def statistic(self):
        return self.cum - self.cum_min

    def update(self, value):
        value = _finite(value)
        self.n_seen += 1
        self.n += 1
        self.x_mean += (value - self.x_mean) / self.n
        self.cum = self.params["alpha_forget"] * self.cum + (value - self.x_mean - self.params["delta_ph"])
        self.cum_min = min(self.cum_min, self.cum)
        if self.n < self.params["min_samples"]:
            return Signal.NONE
        if self.statistic > self.params["lambda"]:
            self.reset()
            return Signal.DRIFT
        return Signal.NONE


# -- KSWIN ----------------------------------------------------------------------


@lru_cache(maxsize=None)
def _ks_pvalues(n):
    """Exact two-sample KS p-values for equal sample sizes ``n``, indexed by ``n * D``.

    Two shifted integer ranges realise every attainable statistic ``k / n``,
    so scipy's exact routine can tabulate all of them once.
    """
    base = np.arange(n, dtype=float)
    with warnings.catch_warnings():
        # for the smallest statistics scipy falls back to the asymptotic
        # formula, which is accurate there (p is essentially 1)
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.array([stats.ks_2samp(base, base + k, method="exact").pvalue for k in range(n + 1)])


def _ks_count(a, b):
    """``n * D`` for two equal-size samples (integer KS statistic)."""
    both = np.concatenate([a, b])
    cdf_a = np.searchsorted(np.sort(a), both, side="right")
    cdf_b = np.searchsorted(np.sort(b), both, side="right")
    return int(np.max(np.abs(cdf_a - cdf_b)))


class Kswin(_Detector):
    """Kolmogorov-Smirnov test between the newest ``stat_size`` samples and a
    random draw of the same size from the rest of a ``window_size`` window.

    The random draw for the sample at position ``t`` is seeded by
    ``(seed, t)``, so the detector is a deterministic function of its input.
    """

    kind = DetectorKind.KSWIN

    def reset(self):
        self.window = deque(maxlen=int(self.params["window_size"]))
        self.last_p_value = None

    def update(self, value):
        value = _finite(value)
        self.n_seen += 1
        self.window.append(value)
        size = int(self.params["window_size"])
        r = int(self.params["stat_size"])
        if len(self.window) < size:
            return Signal.NONE
        data = np.fromiter(self.window, float, count=size)
        recent = data[-r:]
        rng = np.random.default_rng([int(self.params["seed"]), self.n_seen])
        old = rng.choice(data[:-r], size=r, replace=False)
        k = _ks_count(old, recent)
        self.last_p_value = float(_ks_pvalues(r)[k])
        if self.last_p_value <= self.params["alpha"] and k > 0.1 * r:
            self.window.clear()
            self.window.extend(recent)
            return Signal.DRIFT
        return Signal.NONE


# -- HDDM -----------------------------------------------------------------------


class HddmA(_Detector):
    """Hoeffding-bound comparison of the running mean with its historical extremes."""

    kind = DetectorKind.HDDM_A

    def reset(self):
        self.n = 0
        self.total = 0.0
        self.n_min = self.n_max = 0
        self.c_min = self.c_max = 0.0

    @staticmethod
    def _bound(n, confidence):
        return math.sqrt(math.log(1.0 / confidence) / (2.0 * n))

    @staticmethod
    def _shift(c_ref, n_ref, c_tot, n_tot, confidence):
        """Hoeffding test that the mean since the reference point exceeds the reference mean."""
        if n_ref == n_tot:
            return False
        m = (n_tot - n_ref) / n_ref / n_tot
        bound = math.sqrt(m / 2.0 * math.log(2.0 / confidence))
        return c_tot / n_tot - c_ref / n_ref >= bound

    def update(self, value):
        value = _unit(value)
        self.n_seen += 1
        self.n += 1
        self.total += value
        conf = self.params["drift_confidence"]
        here = self.total / self.n
        bound = self._bound(self.n, conf)
        if self.n_min == 0 or here + bound <= self.c_min / self.n_min + self._bound(self.n_min, conf):
            self.n_min, self.c_min = self.n, self.total
        if self.n_max == 0 or here - bound >= self.c_max / self.n_max - self._bound(self.n_max, conf):
            self.n_max, self.c_max = self.n, self.total
        signal = self._test(conf)
        if signal:
            self.reset()
            return Signal.DRIFT
        if self._test(self.params["warn_confidence"]):
            return Signal.WARNING
        return Signal.NONE

    def _test(self, confidence):
        if self._shift(self.c_min, self.n_min, self.total, self.n, confidence):
            return True
        if self.params["two_sided"]:
            # a decrease is an increase of the negated mean relative to the maximum
            return self._shift(-self.c_max, self.n_max, -self.total, self.n, confidence)
        return False


@dataclass
class _Ewma:
    estimate: float = -1.0
    ibc: float = 0.0  # sum of squared weights (McDiarmid bounded-differences term)

    def add(self, value, lam):
        if self.estimate < 0:
            self.estimate, self.ibc = value, 1.0
        else:
            self.estimate = lam * value + (1.0 - lam) * self.estimate
            self.ibc = lam * lam + (1.0 - lam) ** 2 * self.ibc


class HddmW(_Detector):
    """EWMA variant: compares the EWMA since the best cut point with the one before it."""

    kind = DetectorKind.HDDM_W

    def reset(self):
        self.total = _Ewma()
        self.incr = [_Ewma(), _Ewma(), math.inf]  # before-cut, after-cut, cut bound
        self.decr = [_Ewma(), _Ewma(), math.inf]

    @staticmethod
    def _bound(ibc, confidence):
        return math.sqrt(ibc * math.log(1.0 / confidence) / 2.0)

    def _track(self, monitor, value, sign):
        lam = self.params["lambda_ewma"]
        bound = self._bound(self.total.ibc, self.params["drift_confidence"])
        before, after, cut = monitor
        if sign * self.total.estimate + bound < sign * before.estimate + cut or before.estimate < 0:
            monitor[0] = _Ewma(self.total.estimate, self.total.ibc)
            monitor[1] = _Ewma()
            monitor[2] = bound
        else:
            after.add(value, lam)

    def _shifted(self, monitor, sign, confidence):
        before, after, _ = monitor
        if before.estimate < 0 or after.estimate < 0:
            return False
        bound = self._bound(before.ibc + after.ibc, confidence)
        return sign * (after.estimate - before.estimate) > bound

    def update(self, value):
        value = _unit(value)
        self.n_seen += 1
        self.total.add(value, self.params["lambda_ewma"])
        monitors = [(self.incr, 1.0)]
        if self.params["two_sided"]:
            monitors.append((self.decr, -1.0))
        for monitor, sign in monitors:
            self._track(monitor, value, sign)
        if any(self._shifted(m, s, self.params["drift_confidence"]) for m, s in monitors):
            self.reset()
            return Signal.DRIFT
        if any(self._shifted(m, s, self.params["warn_confidence"]) for m, s in monitors):
            return Signal.WARNING
        return Signal.NONE


_CLASSES = {
    DetectorKind.ADWIN: Adwin,
    DetectorKind.DDM: Ddm,
    DetectorKind.EDDM: Eddm,
    DetectorKind.PAGE_HINKLEY: PageHinkley,
    DetectorKind.KSWIN: Kswin,
    DetectorKind.HDDM_A: HddmA,
    DetectorKind.HDDM_W: HddmW,
}


def make_baseline(cfg):
    """Fresh detector for ``cfg`` (a :class:`BaselineConfig` or ``(kind, params)``)."""
    if not isinstance(cfg, BaselineConfig):
        kind, params = cfg
        cfg = BaselineConfig(kind, dict(params))
    return _CLASSES[cfg.kind](cfg)


def baseline_observe(detector, value):
    """Functional form of :meth:`update`: returns ``(detector, signal)``."""
    return detector, detector.update(value)
