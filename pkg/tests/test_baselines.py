import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from driftlab.baselines import (
    Adwin,
    BaselineConfig,
    DetectorKind,
    Signal,
    baseline_observe,
    make_baseline,
)
from driftlab.baselines import _ks_count, _ks_pvalues
from driftlab.errors import BadParam, DomainError, MissingParam, NonFiniteValue
from oracles import ddm_drift_times, page_hinkley_statistic

REQUIRED = {"adwin": {"delta": 0.002}, "page_hinkley": {"lambda": 50.0}, "kswin": {"alpha": 0.005}}


def detector(kind, **params):
    return make_baseline((kind, {**REQUIRED.get(kind, {}), **params}))


def drift_times(det, values):
    return [i for i, v in enumerate(values) if det.update(v) is Signal.DRIFT]


class TestConfig:
    @pytest.mark.parametrize("kind", ["adwin", "page_hinkley", "kswin"])
    def test_tuned_parameters_are_required(self, kind):
        with pytest.raises(MissingParam):
            make_baseline((kind, {}))

    @pytest.mark.parametrize("kind", ["ddm", "eddm", "hddm_a", "hddm_w"])
    def test_defaults_suffice(self, kind):
        assert make_baseline((kind, {})).kind is DetectorKind(kind)

    def test_bad_values(self):
        with pytest.raises(BadParam):
            BaselineConfig("nope")
        with pytest.raises(BadParam):
            BaselineConfig("adwin", {"delta": 1.5})
        with pytest.raises(BadParam):
            BaselineConfig("ddm", {"unknown": 1})
        with pytest.raises(BadParam):
            BaselineConfig("kswin", {"alpha": 0.01, "window_size": 30, "stat_size": 30})
        with pytest.raises(BadParam):
            BaselineConfig("hddm_a", {"drift_confidence": 0.01, "warn_confidence": 0.001})
        with pytest.raises(BadParam):
            BaselineConfig("ddm", {"min_samples": 2.5})

    def test_defaults_are_merged(self):
        cfg = BaselineConfig("ddm", {"drift_k": 4.0})
        assert cfg.params == {"warn_k": 2.0, "drift_k": 4.0, "min_samples": 30}

    def test_input_validation(self):
        with pytest.raises(NonFiniteValue):
            detector("adwin").update(float("nan"))
        with pytest.raises(DomainError):
            detector("ddm").update(1.5)
        with pytest.raises(DomainError):
            detector("hddm_w").update(-0.1)


class TestDdm:
    def test_matches_reference_recurrence(self):
        rng = np.random.default_rng(0)
        errors = np.concatenate([rng.random(2000) < 0.1, rng.random(2000) < 0.4]).astype(float)
        assert drift_times(detector("ddm"), errors) == ddm_drift_times(errors)

    def test_step_in_error_rate_is_caught(self):
        rng = np.random.default_rng(1)
        errors = np.concatenate([rng.random(1000) < 0.05, rng.random(1000) < 0.5]).astype(float)
        alarms = drift_times(detector("ddm", min_samples=200), errors)
        assert any(1000 <= t <= 1200 for t in alarms)

    def test_warning_precedes_drift(self):
        det = detector("ddm")
        warm = (np.random.default_rng(11).random(300) < 0.2).astype(float)
        signals = [det.update(v) for v in warm]
        signals += [det.update(1.0) for _ in range(60)]
        first_warn = signals.index(Signal.WARNING)
        assert first_warn < signals.index(Signal.DRIFT)

    def test_silent_before_min_samples(self):
        det = detector("ddm", min_samples=50)
        assert {det.update(1.0) for _ in range(49)} == {Signal.NONE}


class TestEddm:
    def test_shrinking_error_distance_fires(self):
        det = detector("eddm")
        values = ([0.0] * 49 + [1.0]) * 60 + ([0.0] * 2 + [1.0]) * 200
        alarms = drift_times(det, values)
        assert alarms and alarms[0] >= 3000

    def test_binarises_at_half(self):
        a, b = detector("eddm"), detector("eddm")
        rng = np.random.default_rng(2)
        x = rng.random(3000)
        assert drift_times(a, x) == drift_times(b, (x >= 0.5).astype(float))


class TestPageHinkley:
    def test_statistic_matches_reference(self):
        xs = np.random.default_rng(3).standard_normal(500)
        det = detector("page_hinkley", **{"lambda": 1e9})
        got = []
        for x in xs:
            det.update(x)
            got.append(det.statistic)
        np.testing.assert_allclose(got, page_hinkley_statistic(xs, 0.005, 0.9999), atol=1e-9)

    def test_constant_stream_never_fires(self):
        det = detector("page_hinkley", **{"lambda": 1e-6})
        assert drift_times(det, [0.3] * 5000) == []
        assert det.statistic == 0.0

    def test_upward_shift_fires(self):
        rng = np.random.default_rng(4)
        xs = np.concatenate([rng.normal(0, 1, 1000), rng.normal(3, 1, 500)])
        alarms = drift_times(detector("page_hinkley"), xs)
        assert alarms and 1000 <= alarms[0] < 1100


class TestAdwin:
    def test_fires_on_mean_shift_and_drops_old_data(self):
        rng = np.random.default_rng(5)
        xs = np.concatenate([rng.normal(0.2, 0.05, 2000), rng.normal(0.8, 0.05, 2000)])
        det = detector("adwin")
        alarms = drift_times(det, xs)
        assert alarms and 2000 <= alarms[0] <= 2100
        assert det.width < 2100
        assert det.mean == pytest.approx(0.8, abs=0.02)

    def test_below_cut_never_fires(self):
        det = detector("adwin", delta=0.002)
        assert drift_times(det, [0.5] * 5000) == []
        assert det.width == 5000

    def test_window_statistics_are_exact(self):
        xs = np.random.default_rng(6).random(777)
        det = detector("adwin", delta=1e-12)
        for x in xs:
            det.update(x)
        assert det.width == 777
        assert det.mean == pytest.approx(xs.mean(), abs=1e-12)
        assert det.variance == pytest.approx(((xs - xs.mean()) ** 2).sum(), rel=1e-9)
        assert sum(2**lvl * len(row) for lvl, row in enumerate(det.rows)) == 777

    def test_bucket_rows_are_logarithmic(self):
        det = detector("adwin")
        for _ in range(10000):
            det.update(0.0)
        assert det.n_buckets <= Adwin.M * (np.log2(10000) + 1)
        assert all(len(row) <= Adwin.M for row in det.rows)

    def test_reset(self):
        det = detector("adwin")
        drift_times(det, np.linspace(0, 1, 300))
        det.reset()
        assert (det.width, det.n_buckets, det.total) == (0, 0, 0.0)
        assert det.n_seen == 300


class TestKswin:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(5, 40))
    def test_pvalue_table_matches_scipy(self, seed, r):
        rng = np.random.default_rng(seed)
        a, b = rng.random(r), rng.random(r) + rng.uniform(0, 0.5)
        k = _ks_count(a, b)
        assert k / r == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
        expected = stats.ks_2samp(a, b, method="exact").pvalue
        assert _ks_pvalues(r)[k] == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_pvalues_decrease_with_statistic(self):
        p = _ks_pvalues(30)
        assert np.all(np.diff(p) <= 1e-15)
        assert p[-1] < 1e-15 and p[0] == pytest.approx(1.0)

    def test_deterministic_given_seed(self):
        xs = np.random.default_rng(7).random(3000)
        xs[1500:] += 0.5
        a = drift_times(detector("kswin", seed=3), xs)
        b = drift_times(detector("kswin", seed=3), xs)
        assert a == b and a
        assert any(1500 <= t <= 1600 for t in a)

    def test_stricter_alpha_fires_no_more(self):
        xs = np.random.default_rng(8).random(4000)
        xs[2000:] *= 1.4
        counts = [len(drift_times(detector("kswin", alpha=a), xs)) for a in (0.1, 0.01, 0.001, 1e-4)]
        assert counts == sorted(counts, reverse=True)

    def test_window_restarts_after_drift(self):
        det = detector("kswin", alpha=0.01)
        for _ in range(100):
            det.update(0.0)
        sig = None
        for _ in range(30):
            sig = det.update(1.0)
            if sig is Signal.DRIFT:
                break
        assert sig is Signal.DRIFT
        assert len(det.window) == 30


class TestHddm:
    @pytest.mark.parametrize("kind", ["hddm_a", "hddm_w"])
    def test_increase_detected(self, kind):
        rng = np.random.default_rng(9)
        xs = np.concatenate([rng.random(2000) < 0.1, rng.random(1000) < 0.5]).astype(float)
        alarms = drift_times(detector(kind), xs)
        assert any(2000 <= t <= 2300 for t in alarms)

    @pytest.mark.parametrize("kind", ["hddm_a", "hddm_w"])
    def test_two_sided_catches_decrease(self, kind):
        rng = np.random.default_rng(10)
        xs = np.concatenate([rng.random(2000) < 0.5, rng.random(1000) < 0.05]).astype(float)
        assert any(t >= 2000 for t in drift_times(detector(kind), xs))
        one_sided = drift_times(detector(kind, two_sided=False), xs)
        assert not any(2000 <= t <= 2300 for t in one_sided)

    @pytest.mark.parametrize("kind", ["hddm_a", "hddm_w"])
    def test_constant_is_silent(self, kind):
        assert drift_times(detector(kind), [0.2] * 3000) == []


def test_functional_observe_and_n_seen():
    det = detector("ddm")
    for _ in range(5):
        det, sig = baseline_observe(det, 0.0)
    assert sig is Signal.NONE and det.n_seen == 5


@pytest.mark.parametrize("kind", ["ddm", "eddm", "page_hinkley", "hddm_a", "hddm_w"])
def test_reset_equals_fresh_detector_on_suffix(kind):
    rng = np.random.default_rng(12)
    xs = np.concatenate([rng.random(1500) < 0.1, rng.random(3000) < 0.45]).astype(float)
    params = {"lambda": 5.0} if kind == "page_hinkley" else {}
    det = detector(kind, **params)
    signals = [det.update(v) for v in xs]
    first = signals.index(Signal.DRIFT)
    fresh = detector(kind, **params)
    assert [fresh.update(v) for v in xs[first + 1 :]] == signals[first + 1 :]
