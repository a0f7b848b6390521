"""Acceptance criteria 1-12.

Every test prints exactly one ``CRITERION k: PASS|FAIL`` line with the
measured quantities, then asserts the pinned tolerance.  Criteria that the
implementation does not meet fail visibly; the analysis lives in the
project's decisions log rather than in relaxed thresholds here.
"""

import time

import numpy as np
import pytest

from driftlab.adaptation import (
    AdaptConfig,
    ModelKind,
    OnlineModel,
    adapt_on_drift,
    compute_loss,
    severity,
    train,
)
from driftlab.addm import AddmConfig, AddmDetector, detect_offline
from driftlab.baselines import Signal, make_baseline
from driftlab.bench import BenchConfig, DetectorSpec, run_synthetic
from driftlab.events import DriftEvent
from driftlab.setar import ErrorSeries, TarConfig, ThresholdMode, fit_tar, subsample_ci
from driftlab.streams import DriftSchedule, Family, GeneratorSpec, generate_arrays
from oracles import brute_force_tar, step_series

pytestmark = pytest.mark.acceptance

# -- pinned tolerances ----------------------------------------------------------
C1_TOL, C1_SECONDS = 1e-9, 10.0
C2_SEEDS, C2_MIN_HITS, C2_FRAC, C2_SECONDS = 100, 95, 0.02, 30.0
C3_SEEDS, C3_LOW, C3_HIGH = 200, 0.01, 0.10
C4_REPS, C4_MIN_COVERAGE = 200, 0.80
C5_SEEDS, C5_MIN_TP, C5_MAX_FA, C5_SECONDS = 10, 2.5, 1.0, 300.0
C6_SEEDS, C6_MIN_TP, C6_MAX_FA = 10, 4.0, 2.0
C8_PAIRS = 10_000
C9_REPS, C9_SEVERE_RATIO, C9_SEVERE_SLACK = 10, 5.0, 0.10
C10_SEEDS, C10_MIN_FIRE, C10_MIN_SILENT, C10_DELAY = 100, 90, 95, 300
C10_ADWIN_N = 1_000_000
C11_STREAMS = 20
MATCH_TOLERANCE = 500

# Per-dataset tuned baseline parameters (ADWIN delta, PH lambda, KSWIN alpha).
TUNED = {
    "mixed": {"adwin": 0.0441, "page_hinkley": 1e-6, "kswin": 0.0059},
    "brieman_2d_planes": {"adwin": 1e-3, "page_hinkley": 1e-6, "kswin": 0.0032},
}


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")


def all_detectors(family):
    tuned = TUNED[family]
    return [
        DetectorSpec("addm", "addm", {"ci_level": None}),
        DetectorSpec("adwin", "adwin", {"delta": tuned["adwin"]}),
        DetectorSpec("ddm", "ddm"),
        DetectorSpec("eddm", "eddm"),
        DetectorSpec("ph", "page_hinkley", {"lambda": tuned["page_hinkley"]}),
        DetectorSpec("kswin", "kswin", {"alpha": tuned["kswin"]}),
        DetectorSpec("hddm_a", "hddm_a"),
        DetectorSpec("hddm_w", "hddm_w"),
    ]


def benchmark(family, n_seeds):
    cfg = BenchConfig(
        all_detectors(family),
        GeneratorSpec(family, 20_000),
        match_tolerance=MATCH_TOLERANCE,
        seeds=tuple(range(n_seeds)),
    )
    return run_synthetic(cfg)


@pytest.fixture(scope="module")
def mixed_report():
    return benchmark("mixed", C5_SEEDS)


# -- 1 --------------------------------------------------------------------------


def test_criterion_1_brute_force_equivalence(capsys):
    rng = np.random.default_rng(2024)
    worst, elapsed, mismatches = 0.0, 0.0, 0
    for case in range(50):
        n = int(rng.integers(100, 301))
        p = int(rng.choice([1, 2, 5]))
        mode = ThresholdMode.TIME_INDEX if case % 2 == 0 else ThresholdMode.SELF_EXCITING
        d = int(rng.integers(1, p + 1))
        y = rng.standard_normal(n)
        if case % 4 < 2:  # half the series carry a genuine regime change
            y[n // 2 :] += 1.5
        cfg = TarConfig(p=p, d=d, threshold_mode=mode)
        started = time.perf_counter()
        fit = fit_tar(ErrorSeries(y), cfg, test=False)
        elapsed += time.perf_counter() - started
        r_ref, s2_ref = brute_force_tar(y, p, d, mode.value, cfg.min_regime_frac)
        err = max(abs(fit.threshold - r_ref), abs(fit.sigma2 - s2_ref))
        worst = max(worst, err)
        mismatches += err > C1_TOL
    ok = mismatches == 0 and elapsed < C1_SECONDS
    report(capsys, 1, ok, f"max |diff| {worst:.2e} over 50 series, fit time {elapsed:.2f}s")
    assert ok


# -- 2 --------------------------------------------------------------------------


def test_criterion_2_change_point_recovery(capsys):
    n, at = 1000, 500
    cfg = TarConfig()
    hits = 0
    started = time.perf_counter()
    for seed in range(C2_SEEDS):
        y = step_series(np.random.default_rng(seed), n, at, 0.1, 0.5, 0.05)
        fit = fit_tar(ErrorSeries(y), cfg, test=False)
        hits += abs(fit.threshold - at) <= C2_FRAC * n
    elapsed = time.perf_counter() - started
    ok = hits >= C2_MIN_HITS and elapsed < C2_SECONDS
    report(capsys, 2, ok, f"{hits}/{C2_SEEDS} steps within +-{C2_FRAC * n:.0f} samples in {elapsed:.1f}s")
    assert ok


# -- 3 --------------------------------------------------------------------------


def test_criterion_3_null_calibration(capsys):
    cfg = TarConfig(bootstrap_reps=200, significance_level=0.05)
    rejections = 0
    for seed in range(C3_SEEDS):
        y = np.random.default_rng(seed).standard_normal(500)
        fit = fit_tar(ErrorSeries(y), cfg, seed=seed)
        rejections += fit.p_value <= 0.05
    rate = rejections / C3_SEEDS
    ok = C3_LOW <= rate <= C3_HIGH
    report(capsys, 3, ok, f"rejection rate {rate:.3f} at level 0.05 (target [{C3_LOW}, {C3_HIGH}])")
    assert ok


# -- 4 --------------------------------------------------------------------------


def test_criterion_4_ci_coverage(capsys):
    cfg = TarConfig()
    n, at = 500, 250
    covered, widths = 0, []
    for seed in range(C4_REPS):
        series = ErrorSeries(step_series(np.random.default_rng(seed), n, at, 0.1, 0.5, 0.2))
        fit = fit_tar(series, cfg, test=False)
        ci = subsample_ci(series, cfg, fit, 0.9)
        covered += ci.lower <= at <= ci.upper
        widths.append(ci.upper - ci.lower)
    coverage = covered / C4_REPS
    ok = coverage >= C4_MIN_COVERAGE
    report(capsys, 4, ok, f"coverage {coverage:.3f} at nominal 0.90, mean width {np.mean(widths):.1f}")
    assert ok


# -- 5 / 6 / 7 ------------------------------------------------------------------


def test_criterion_5_mixed(capsys, mixed_report):
    addm = mixed_report.by_id("addm")
    per_seed_seconds = [r["mtd_seconds"] for r in addm.per_seed]
    total = float(np.sum(per_seed_seconds))
    ok = addm.tp_mean >= C5_MIN_TP and addm.fa_mean <= C5_MAX_FA and total < C5_SECONDS
    report(
        capsys,
        5,
        ok,
        f"ADDM mean TP {addm.tp_mean:.2f} (>= {C5_MIN_TP}), mean FA {addm.fa_mean:.2f} (<= {C5_MAX_FA}), "
        f"detector time {total:.1f}s",
    )
    assert ok


def test_criterion_6_brieman(capsys):
    addm = benchmark("brieman_2d_planes", C6_SEEDS).by_id("addm")
    ok = addm.tp_mean >= C6_MIN_TP and addm.fa_mean <= C6_MAX_FA
    report(capsys, 6, ok, f"ADDM mean TP {addm.tp_mean:.2f} (>= {C6_MIN_TP}), mean FA {addm.fa_mean:.2f} (<= {C6_MAX_FA})")
    assert ok


def test_criterion_7_sensitivity_gap(capsys, mixed_report):
    fa = {d: mixed_report.by_id(d).fa_mean for d in ("addm", "ddm", "kswin", "ph", "eddm")}
    beaten = [d for d in ("ddm", "kswin", "ph", "eddm") if not fa["addm"] < fa[d]]
    ok = not beaten
    detail = ", ".join(f"{d} {v:.1f}" for d, v in fa.items())
    if beaten:
        detail += f"; ADDM not strictly below: {beaten}"
    report(capsys, 7, ok, f"mean FA on Mixed: {detail}")
    assert ok


# -- 8 --------------------------------------------------------------------------


def test_criterion_8_severity(capsys):
    rng = np.random.default_rng(8)
    pairs = np.exp(rng.uniform(-12, 12, size=(C8_PAIRS, 2)))
    pairs[: C8_PAIRS // 10, 1] = pairs[: C8_PAIRS // 10, 0]  # include exact ties
    scales = np.exp(rng.uniform(-6, 6, size=C8_PAIRS))
    failures = 0
    for (a, b), c in zip(pairs, scales):
        w = severity([a], [b]).w
        failures += not (0.5 <= w < 1.0)
        failures += w != severity([b], [a]).w
        failures += abs(w - severity([c * a], [c * b]).w) > 1e-12
        failures += (w == 0.5) != (a == b)
    examples = [
        severity([1.0], [1.0]).w == 0.5,
        severity([1.0], [3.0]).w == 0.75,
        severity([3.0], [1.0]).w == 0.75,
    ]
    ok = failures == 0 and all(examples)
    report(capsys, 8, ok, f"{C8_PAIRS} pairs, {failures} property violations, tagged examples {examples}")
    assert ok


# -- 9 --------------------------------------------------------------------------


def _adaptation_trial(sequence, seed, n=6000, change=3000, recent=200):
    spec = GeneratorSpec("friedman", n, seed, schedule=DriftSchedule([change], sequence))
    X, y, _, _ = generate_arrays(spec)
    train_end = int(0.8 * change)
    old = train(OnlineModel.zeros(ModelKind.LINEAR_REGRESSION, X.shape[1]), (X[:train_end], y[:train_end]), 20, seed)
    pre_losses = compute_loss("squared", y[train_end:change], old.predict(X[train_end:change]))
    event = DriftEvent("oracle", change, change + recent)
    window = (X[change : change + recent], y[change : change + recent])
    ens = adapt_on_drift(old, event, window, pre_losses, AdaptConfig(epochs=20, seed=seed))
    X_test, y_test = X[change + recent :], y[change + recent :]
    ens_loss = float(np.mean((ens.predict(X_test) - y_test) ** 2))
    new_loss = float(np.mean((ens.new.predict(X_test) - y_test) ** 2))
    return ens_loss, new_loss, ens.w.q3_new / ens.w.q3_old


def test_criterion_9_adaptation_benefit(capsys):
    recurring = np.array([_adaptation_trial((0, 0), s) for s in range(C9_REPS)])
    severe = np.array([_adaptation_trial((0, 1), s) for s in range(C9_REPS)])
    rec_ens, rec_new = recurring[:, 0].mean(), recurring[:, 1].mean()
    sev_ens, sev_new = severe[:, 0].mean(), severe[:, 1].mean()
    min_ratio = severe[:, 2].min()
    ok_rec = rec_ens <= rec_new
    ok_sev = sev_ens <= (1 + C9_SEVERE_SLACK) * sev_new
    ok = ok_rec and ok_sev
    report(
        capsys,
        9,
        ok,
        f"recurring: ensemble {rec_ens:.3f} vs new {rec_new:.3f} "
        f"({int(np.sum(recurring[:, 0] <= recurring[:, 1]))}/{C9_REPS} reps no worse); "
        f"severe (q3 ratio >= {min_ratio:.1f}): ensemble {sev_ens:.3f} vs new {sev_new:.3f} "
        f"(+{100 * (sev_ens / sev_new - 1):.1f}%, "
        f"{int(np.sum(severe[:, 0] <= 1.1 * severe[:, 1]))}/{C9_REPS} reps within 10%)",
    )
    assert min_ratio >= C9_SEVERE_RATIO or np.median(severe[:, 2]) >= C9_SEVERE_RATIO
    assert ok


# -- 10 -------------------------------------------------------------------------


def _ddm_trials():
    fired = silent = 0
    for seed in range(C10_SEEDS):
        rng = np.random.default_rng(seed)
        det = make_baseline(("ddm", {}))
        stationary = (rng.random(5000) < 0.1).astype(float)
        silent += all(det.update(v) is not Signal.DRIFT for v in stationary)
        rng = np.random.default_rng(10_000 + seed)
        det = make_baseline(("ddm", {}))
        rate = np.where(np.arange(2000) < 1000, 0.1, 0.4)
        step = (rng.random(2000) < rate).astype(float)
        alarms = [i for i, v in enumerate(step) if det.update(v) is Signal.DRIFT]
        fired += any(1000 <= i <= 1000 + C10_DELAY for i in alarms)
    return fired, silent


def _adwin_max_buckets():
    det = make_baseline(("adwin", {"delta": 0.002}))
    values = np.random.default_rng(10).random(C10_ADWIN_N)
    worst = 0
    for i, v in enumerate(values.tolist()):
        det.update(v)
        if i % 997 == 0:
            worst = max(worst, det.n_buckets)
    return max(worst, det.n_buckets)


def _kswin_monotone():
    alphas = (0.05, 0.01, 0.005, 0.001, 1e-4)
    violations = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        xs = np.concatenate([rng.random(1500), rng.random(1500) * 1.3, rng.random(1500) + 0.2])
        counts = []
        for a in alphas:
            det = make_baseline(("kswin", {"alpha": a, "seed": seed}))
            counts.append(sum(det.update(v) is Signal.DRIFT for v in xs))
        violations += any(b > a for a, b in zip(counts, counts[1:]))
    return violations


def test_criterion_10_baseline_sanity(capsys):
    fired, silent = _ddm_trials()
    buckets = _adwin_max_buckets()
    bound = 5 * (np.log2(C10_ADWIN_N) + 1) * 2
    violations = _kswin_monotone()
    parts = {
        "ddm_fires": fired >= C10_MIN_FIRE,
        "ddm_silent": silent >= C10_MIN_SILENT,
        "adwin_buckets": buckets <= bound,
        "kswin_monotone": violations == 0,
    }
    ok = all(parts.values())
    report(
        capsys,
        10,
        ok,
        f"DDM fires within {C10_DELAY} in {fired}/{C10_SEEDS} (>= {C10_MIN_FIRE}), "
        f"silent on stationary in {silent}/{C10_SEEDS} (>= {C10_MIN_SILENT}); "
        f"ADWIN max buckets {buckets} <= {bound:.0f}; KSWIN monotonicity violations {violations}/10; "
        f"failed parts: {[k for k, v in parts.items() if not v]}",
    )
    assert ok


# -- 11 -------------------------------------------------------------------------


def test_criterion_11_offline_equivalence(capsys):
    cfg = AddmConfig(window=200, tar=TarConfig(significance_level=0.01, bootstrap_reps=99))
    mismatches, total_events = 0, 0
    for seed in range(C11_STREAMS):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1200, 2000))
        at = int(rng.integers(500, n - 300))
        errors = np.abs(rng.standard_normal(n)) * np.where(np.arange(n) < at, 1.0, rng.uniform(1.0, 4.0))
        offline = detect_offline(errors, cfg)
        det = AddmDetector(errors[: cfg.window], cfg, stream_start=cfg.window)
        folded = [e for e in map(det.observe, errors[cfg.window :]) if e is not None]
        total_events += len(offline)
        same = len(offline) == len(folded) and all(a.same_detection(b) for a, b in zip(offline, folded))
        mismatches += not same
    ok = mismatches == 0
    report(capsys, 11, ok, f"{C11_STREAMS - mismatches}/{C11_STREAMS} streams identical ({total_events} events)")
    assert ok


# -- 12 -------------------------------------------------------------------------


def test_criterion_12_oracle_self_test(capsys):
    bad = []
    for family in Family:
        cfg = BenchConfig([DetectorSpec("oracle", "oracle")], GeneratorSpec(family, 20_000), seeds=(0, 1))
        result = run_synthetic(cfg).by_id("oracle")
        n_drifts = sum(len(r.get("events", [])) for r in result.per_seed)
        expected = sum(r["n_drifts"] for r in result.per_seed)
        if not (result.tp == expected == n_drifts and result.fa == 0 and result.mean_delay_samples == 0.0):
            bad.append(family.value)
    ok = not bad
    report(capsys, 12, ok, f"oracle exact on {len(Family) - len(bad)}/{len(Family)} families {bad or ''}")
    assert ok
