import numpy as np
import pytest

from driftlab.addm import AddmConfig, AddmDetector, detect_offline
from driftlab.errors import BadParam, DomainError, NonFiniteValue, SeriesTooShort
from driftlab.setar import ErrorSeries, TarConfig, min_series_length
from oracles import step_series

FAST = AddmConfig(window=200, tar=TarConfig(significance_level=0.01, bootstrap_reps=99), ci_level=None)


def abs_errors(rng, n, scale=1.0):
    """Half-normal losses (absolute residuals of a Gaussian model)."""
    return scale * np.abs(rng.standard_normal(n))


class TestConfig:
    def test_defaults(self):
        cfg = AddmConfig()
        assert cfg.window == 500 and cfg.min_gap == 500 and cfg.cadence == 125
        assert cfg.tar.significance_level == 0.01

    def test_window_too_small(self):
        with pytest.raises(BadParam):
            AddmConfig(window=min_series_length(TarConfig()) - 1)

    def test_bad_ci_level(self):
        with pytest.raises(BadParam):
            AddmConfig(ci_level=1.0)

    def test_short_reference(self):
        with pytest.raises(SeriesTooShort):
            AddmDetector(np.ones(5), FAST)

    def test_input_checks(self):
        det = AddmDetector(np.random.default_rng(0).random(200), FAST)
        with pytest.raises(NonFiniteValue):
            det.observe(float("inf"))
        with pytest.raises(DomainError):
            det.observe(-1.0)


class TestDetection:
    def test_step_is_localised(self):
        rng = np.random.default_rng(1)
        errors = np.concatenate([abs_errors(rng, 1200), abs_errors(rng, 800, 4.0)])
        events = detect_offline(errors, FAST)
        assert events, "a fourfold loss increase must be detected"
        first = events[0]
        assert abs(first.stream_index - 1200) <= 40
        assert first.stream_index <= first.detected_at_index
        assert first.severity > 0.5
        assert first.p_value <= 0.01

    def test_level_step_in_mean(self):
        rng = np.random.default_rng(2)
        errors = np.abs(step_series(rng, 2000, 1000, 1.0, 2.0, 0.2))
        events = detect_offline(errors, FAST)
        assert [e for e in events if abs(e.stream_index - 1000) <= 20]

    def test_two_steps_give_two_events(self):
        rng = np.random.default_rng(3)
        errors = np.concatenate([abs_errors(rng, 1000), abs_errors(rng, 1000, 5.0), abs_errors(rng, 1000)])
        events = detect_offline(errors, FAST)
        hits = [min(abs(e.stream_index - c) for e in events) for c in (1000, 2000)]
        assert max(hits) <= 50

    def test_stationary_rarely_alarms(self):
        alarms = 0
        for seed in range(5):
            errors = abs_errors(np.random.default_rng(100 + seed), 2000)
            alarms += len(detect_offline(errors, FAST))
        assert alarms <= 2

    def test_confidence_interval_in_stream_coordinates(self):
        rng = np.random.default_rng(4)
        errors = np.concatenate([abs_errors(rng, 800), abs_errors(rng, 600, 6.0)])
        cfg = AddmConfig(window=200, tar=TarConfig(significance_level=0.01, bootstrap_reps=99, ci_subsamples=30))
        event = detect_offline(errors, cfg)[0]
        assert event.ci is not None
        assert event.ci.lower <= event.ci.upper
        assert 500 <= event.ci.lower and event.ci.upper <= event.detected_at_index + 1


class TestStreamingInvariants:
    def _run(self, seed, start=0):
        rng = np.random.default_rng(seed)
        errors = np.concatenate([abs_errors(rng, 700), abs_errors(rng, 700, 5.0), abs_errors(rng, 700, 0.5)])
        det = AddmDetector(errors[:200], FAST, stream_start=start)
        events = []
        for i, v in enumerate(errors[200:]):
            ev = det.observe(v)
            if ev is not None:
                assert ev.detected_at_index == start + i
                events.append(ev)
        return events

    def test_alarms_on_cadence_and_gap(self):
        events = self._run(5)
        assert events
        for e in events:
            assert (e.detected_at_index + 1) % FAST.cadence == 0
            assert 0 <= e.stream_index <= e.detected_at_index
        located = [e.stream_index for e in events]
        assert all(b - a >= FAST.min_gap for a, b in zip(located, located[1:]))

    def test_stream_start_shifts_indices(self):
        base, shifted = self._run(6), self._run(6, start=10_000)
        assert [e.stream_index + 10_000 for e in base] == [e.stream_index for e in shifted]

    def test_deterministic(self):
        a, b = self._run(7), self._run(7)
        assert len(a) == len(b) and all(x.same_detection(y) for x, y in zip(a, b))


class TestOffline:
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_manual_streaming(self, seed):
        rng = np.random.default_rng(seed)
        errors = np.concatenate([abs_errors(rng, 900), abs_errors(rng, 900, 3.0)])
        offline = detect_offline(errors, FAST, n_validation=300)
        det = AddmDetector(errors[:300], FAST, stream_start=300)
        online = [e for e in map(det.observe, errors[300:]) if e is not None]
        assert len(offline) == len(online)
        assert all(a.same_detection(b) for a, b in zip(offline, online))

    def test_error_series_start_index(self):
        rng = np.random.default_rng(8)
        values = np.concatenate([abs_errors(rng, 900), abs_errors(rng, 900, 4.0)])
        plain = detect_offline(values, FAST)
        offset = detect_offline(ErrorSeries(values, start_index=50), FAST)
        assert [e.stream_index + 50 for e in plain] == [e.stream_index for e in offset]

    def test_short_input(self):
        assert detect_offline(np.ones(150), FAST) == []
        with pytest.raises(BadParam):
            detect_offline(np.ones(500), FAST, n_validation=-1)
