"""Two-regime threshold autoregression fitted by OLS with an exhaustive threshold scan.

The model splits the rows of an AR(p) design into two regimes according to a
threshold variable (a lagged value of the series, or the time index itself) and
fits each regime by ordinary least squares.  The threshold minimising the
pooled residual variance is found by scanning every admissible split.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadParam,
    NoAdmissibleSplit,
    NonFiniteValue,
    RankDeficient,
    SeriesTooShort,
)

__all__ = [
    "ErrorSeries",
    "LagDesign",
    "TarConfig",
    "TarFit",
    "ThresholdCI",
    "ThresholdMode",
    "build_lag_design",
    "fit_tar",
    "min_series_length",
    "ols_fit",
    "significance_test",
    "subsample_ci",
]

RANK_TOL = 1e-10
# relative SSR gap under which two candidate splits count as tied
TIE_RTOL = 1e-12
_BOOT_CHUNK = 100


class ThresholdMode(str, enum.Enum):
    SELF_EXCITING = "self_exciting"
    TIME_INDEX = "time_index"


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    """Ordered per-sample losses with the stream index of the first value."""

    values: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue("error series contains non-finite values")
        if self.start_index < 0:
            raise BadParam(f"start_index must be >= 0, got {self.start_index}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start_index", int(self.start_index))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class TarConfig:
    """Hyper-parameters of the two-regime threshold AR fit.

    Parameters
    ----------
    p : int
        Autoregressive order.
    d : int
        Threshold delay, used in self-exciting mode (threshold variable
        ``Y[t - d]``).
    threshold_mode : ThresholdMode
        ``TIME_INDEX`` thresholds on the observation index so the estimated
        threshold is a change point; ``SELF_EXCITING`` thresholds on the
        lagged series value.
    min_regime_frac : float
        Trimming: each regime keeps at least this fraction of the rows.
    significance_level : float
        Level at which the bootstrap test declares a split significant.
    bootstrap_reps : int
        Number of fixed-regressor bootstrap replicates.
    seed : int
        Master seed for the bootstrap and subsampling.
    ci_subsamples : int
        Number of contiguous blocks used by :func:`subsample_ci`.
    subsample_exponent : float
        Block length is ``ceil(n_obs ** subsample_exponent)``.
    """

    p: int = 5
    d: int = 2
    threshold_mode: ThresholdMode = ThresholdMode.TIME_INDEX
    min_regime_frac: float = 0.15
    significance_level: float = 0.05
    bootstrap_reps: int = 200
    seed: int = 0
    ci_subsamples: int = 100
    subsample_exponent: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "threshold_mode", ThresholdMode(self.threshold_mode))
        if self.p < 1:
            raise BadParam(f"p must be >= 1, got {self.p}")
        if not 1 <= self.d <= self.p:
            raise BadParam(f"d must satisfy 1 <= d <= p, got d={self.d}, p={self.p}")
        if not 0.0 < self.min_regime_frac < 0.5:
            raise BadParam("min_regime_frac must lie in (0, 0.5)")
        if not 0.0 < self.significance_level < 1.0:
            raise BadParam("significance_level must lie in (0, 1)")
        if self.bootstrap_reps < 1:
            raise BadParam("bootstrap_reps must be positive")
        if self.ci_subsamples < 1:
            raise BadParam("ci_subsamples must be positive")
        if not 0.0 < self.subsample_exponent < 1.0:
            raise BadParam("subsample_exponent must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class LagDesign:
    """Regressor rows ``(1, Y[t-1], ..., Y[t-p])`` with aligned targets.

    ``row_index`` holds the absolute stream index ``t`` of each row's target.
    """

    rows: np.ndarray
    targets: np.ndarray
    threshold_var: np.ndarray
    row_index: np.ndarray | None = None

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        tv = np.asarray(self.threshold_var, dtype=float).reshape(-1)
        if not (rows.shape[0] == targets.shape[0] == tv.shape[0]):
            raise BadParam("rows, targets and threshold_var must have equal length")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "threshold_var", tv)
        if self.row_index is None:
            object.__setattr__(self, "row_index", np.arange(rows.shape[0]))
        else:
            object.__setattr__(self, "row_index", np.asarray(self.row_index, dtype=np.int64))

    @property
    def n_rows(self):
        return self.rows.shape[0]


@dataclass(frozen=True, eq=False)
class TarFit:
    phi: np.ndarray
    beta: np.ndarray
    threshold: float
    threshold_index: int
    sigma2: float
    sigma2_linear: float
    f_stat: float
    p_value: float
    n_obs: int
    threshold_mode: ThresholdMode = field(default=ThresholdMode.TIME_INDEX)

    def significant(self, level):
        return self.p_value <= level

    def to_dict(self):
        return {
            "phi": [float(v) for v in self.phi],
            "beta": [float(v) for v in self.beta],
            "threshold": float(self.threshold),
            "threshold_index": int(self.threshold_index),
            "sigma2": float(self.sigma2),
            "sigma2_linear": float(self.sigma2_linear),
            "f_stat": float(self.f_stat),
            "p_value": float(self.p_value),
            "n_obs": int(self.n_obs),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data, threshold_mode=ThresholdMode.TIME_INDEX):
        return cls(
            phi=np.asarray(data["phi"], dtype=float),
            beta=np.asarray(data["beta"], dtype=float),
            threshold=float(data["threshold"]),
            threshold_index=int(data["threshold_index"]),
            sigma2=float(data["sigma2"]),
            sigma2_linear=float(data["sigma2_linear"]),
            f_stat=float(data["f_stat"]),
            p_value=float(data["p_value"]),
            n_obs=int(data["n_obs"]),
            threshold_mode=ThresholdMode(threshold_mode),
        )


@dataclass(frozen=True)
class ThresholdCI:
    lower: float
    upper: float
    nominal_level: float
    subsample_size: int
    n_subsamples: int

    def contains(self, value):
        return self.lower <= value <= self.upper


def min_series_length(cfg):
    """Shortest series for which two identifiable regimes can exist."""
    return cfg.p + max(cfg.d, 1) + 2 * (cfg.p + 2)


def min_regime_rows(n_rows, cfg):
    return max(math.ceil(cfg.min_regime_frac * n_rows), cfg.p + 2)


def build_lag_design(series, cfg):
    """Build the AR(p) regressor matrix and threshold variable for ``series``.

    Only ``len(series) > p`` is required here; :func:`fit_tar` enforces the
    longer two-regime minimum.
    """
    y = series.values if isinstance(series, ErrorSeries) else ErrorSeries(series).values
    start = series.start_index if isinstance(series, ErrorSeries) else 0
    p, n = cfg.p, y.shape[0]
    if n <= p:
        raise SeriesTooShort(f"need more than p={p} values, got {n}")
    n_rows = n - p
    rows = np.empty((n_rows, p + 1))
    rows[:, 0] = 1.0
    for lag in range(1, p + 1):
        rows[:, lag] = y[p - lag : n - lag]
    row_index = start + np.arange(p, n)
    if cfg.threshold_mode is ThresholdMode.SELF_EXCITING:
        threshold_var = y[p - cfg.d : n - cfg.d].copy()
    else:
        threshold_var = row_index.astype(float)
    return LagDesign(rows, y[p:].copy(), threshold_var, row_index)


# -- linear algebra -----------------------------------------------------------


def _equilibrate(A):
    diag = np.diagonal(A, axis1=-2, axis2=-1)
    scale = 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0))
    return A * scale[..., :, None] * scale[..., None, :], scale


def _batched_cholesky(A):
    """Cholesky factors of a stack of SPD matrices, never raising.

    Returns ``(L, ok)`` where ``ok`` flags matrices whose smallest pivot exceeds
    ``RANK_TOL`` times the largest diagonal entry.
    """
    q = A.shape[-1]
    L = np.zeros_like(A)
    pivots = np.empty(A.shape[:-1])
    floor = RANK_TOL * np.max(np.diagonal(A, axis1=-2, axis2=-1), axis=-1)
    for j in range(q):
        s = A[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        pivots[..., j] = s
        # failed pivots get a unit diagonal so the (discarded) factor stays finite
        ljj = np.sqrt(np.where(s > floor, s, 1.0))
        L[..., j, j] = ljj
        if j + 1 < q:
            below = A[..., j + 1 :, j] - np.einsum("...ik,...k->...i", L[..., j + 1 :, :j], L[..., j, :j])
            L[..., j + 1 :, j] = below / ljj[..., None]
    ok = np.min(pivots, axis=-1) > floor
    return L, ok


def _forward(L, b):
    """Solve ``L z = b`` for lower-triangular ``L``; broadcasts over leading axes."""
    q = L.shape[-1]
    z = np.empty(np.broadcast_shapes(L.shape[:-1], b.shape))
    for j in range(q):
        acc = b[..., j] - np.einsum("...k,...k->...", L[..., j, :j], z[..., :j])
        z[..., j] = acc / L[..., j, j]
    return z


def _backward(L, z):
    """Solve ``L' x = z``."""
    q = L.shape[-1]
    x = np.empty_like(z)
    for j in range(q - 1, -1, -1):
        acc = z[..., j] - np.einsum("...k,...k->...", L[..., j + 1 :, j], x[..., j + 1 :])
        x[..., j] = acc / L[..., j, j]
    return x


def _spd_solve(A, b):
    As, scale = _equilibrate(A)
    L, ok = _batched_cholesky(As)
    if not ok:
        raise RankDeficient("normal equations are singular within tolerance")
    return scale * _backward(L, _forward(L, scale * b))


def _regime_ols(X, y):
    coef = _spd_solve(X.T @ X, X.T @ y)
    resid = y - X @ coef
    return coef, float(resid @ resid)


def ols_fit(design, split_mask):
    """OLS estimate of both regime coefficient vectors.

    Parameters
    ----------
    design : LagDesign
    split_mask : array of bool
        ``True`` marks rows belonging to regime 2 (above the threshold).

    Returns
    -------
    phi, beta, sigma2
        Regime coefficient vectors (``None`` for an empty regime) and the
        residual variance ``SSR / T`` over all rows.
    """
    mask = np.asarray(split_mask, dtype=bool).reshape(-1)
    if mask.shape[0] != design.n_rows:
        raise BadParam("split_mask length must match the design rows")
    need = design.rows.shape[1] + 1
    coefs, ssr = [], 0.0
    for sel in (~mask, mask):
        count = int(sel.sum())
        if count == 0:
            coefs.append(None)
            continue
        if count < need:
            raise SeriesTooShort(f"regime has {count} rows, needs at least {need}")
        coef, part = _regime_ols(design.rows[sel], design.targets[sel])
        coefs.append(coef)
        ssr += part
    return coefs[0], coefs[1], ssr / design.n_rows


# -- threshold scan -----------------------------------------------------------


def _candidate_splits(design, cfg):
    """Sorted row order and admissible split positions.

    A split at position ``k`` puts the first ``k`` sorted rows in regime 1.
    """
    n_rows = design.n_rows
    m = min_regime_rows(n_rows, cfg)
    order = np.argsort(design.threshold_var, kind="stable")
    tv = design.threshold_var[order]
    ks = np.arange(m, n_rows - m + 1)
    if ks.size:
        # a split must fall between distinct threshold values
        ks = ks[tv[ks - 1] < tv[ks]]
    return order, tv, ks


def _centered(design):
    rows = design.rows.copy()
    shift = float(np.mean(design.targets))
    rows[:, 1:] -= shift
    return rows, design.targets - shift


def _inverse_factor(A):
    """Return ``(M, ok)`` with ``c' A^{-1} c == |M c|^2`` for each matrix in the stack."""
    As, scale = _equilibrate(A)
    L, ok = _batched_cholesky(As)
    q = A.shape[-1]
    eye = np.broadcast_to(np.eye(q), A.shape)
    Linv = _forward(L[..., None, :, :], np.swapaxes(eye, -1, -2)[..., :, :])
    # rows of _forward's output are solutions for each unit vector; transpose to get L^{-1}
    Linv = np.swapaxes(Linv, -1, -2)
    return Linv * scale[..., None, :], ok


class _SplitScanner:
    """Pooled two-regime SSR for every admissible split of a fixed design.

    The regressors are fixed, so each split's normal matrices are factorised
    once; :meth:`ssr` then evaluates any stack of target vectors.
    """

    def __init__(self, design, cfg):
        self.order, self.tv, self.ks = _candidate_splits(design, cfg)
        rows = design.rows.copy()
        self.shift = float(np.mean(design.targets))
        rows[:, 1:] -= self.shift
        self.xs = rows[self.order]
        outer = self.xs[:, :, None] * self.xs[:, None, :]
        cum_a = np.cumsum(outer, axis=0)
        ks = self.ks
        self.m1, ok1 = _inverse_factor(cum_a[ks - 1])
        self.m2, ok2 = _inverse_factor(cum_a[-1] - cum_a[ks - 1])
        self.m0, ok0 = _inverse_factor(cum_a[-1])
        self.ok = ok1 & ok2 & bool(ok0)

    def ssr(self, targets):
        """``targets`` is ``(B, T)`` in design row order; returns ``(ssr (B, K), ssr_linear (B,))``."""
        ys = targets[:, self.order] - self.shift
        ks = self.ks
        cum_c = np.cumsum(ys[:, :, None] * self.xs[None, :, :], axis=1)
        c1 = cum_c[:, ks - 1]
        c_tot = cum_c[:, -1]
        c2 = c_tot[:, None, :] - c1
        s_tot = np.sum(ys * ys, axis=1)
        # (K, q, q) @ (K, q, B) -> (K, q, B)
        z1 = self.m1 @ np.transpose(c1, (1, 2, 0))
        z2 = self.m2 @ np.transpose(c2, (1, 2, 0))
        quad = (np.sum(z1 * z1, axis=1) + np.sum(z2 * z2, axis=1)).T
        ssr = s_tot[:, None] - quad
        z0 = self.m0 @ c_tot.T
        ssr_linear = s_tot - np.sum(z0 * z0, axis=0)
        return np.maximum(ssr, 0.0), np.maximum(ssr_linear, 0.0)


def _pick_split(ssr, ok):
    masked = np.where(ok, ssr, np.inf)
    best = np.min(masked)
    if not np.isfinite(best):
        return None
    tied = np.flatnonzero(masked <= best * (1.0 + TIE_RTOL) + 1e-300)
    return int(tied[0])


def _f_stat(n_obs, sigma2_linear, sigma2):
    if sigma2 > 0:
        return max(n_obs * (sigma2_linear - sigma2) / sigma2, 0.0)
    return math.inf if sigma2_linear > 0 else 0.0


def _regime2_mask(design, threshold, mode):
    if mode is ThresholdMode.TIME_INDEX:
        return design.threshold_var >= threshold
    return design.threshold_var > threshold


def fit_tar(series, cfg, test=True, seed=None):
    """Fit the two-regime threshold AR model by exhaustive threshold search.

    In time-index mode the threshold is the index of the first regime-2
    observation; in self-exciting mode it is a value of ``Y[t - d]`` and
    regime 2 holds rows with ``Y[t - d] > threshold``.  Ties between splits are
    broken toward the smallest threshold.

    When ``test`` is false the bootstrap is skipped and ``p_value`` is NaN.
    """
    if not isinstance(series, ErrorSeries):
        series = ErrorSeries(series)
    if len(series) < min_series_length(cfg):
        raise SeriesTooShort(
            f"series of length {len(series)} is shorter than {min_series_length(cfg)}"
        )
    design = build_lag_design(series, cfg)
    scanner = _SplitScanner(design, cfg)
    tv, ks = scanner.tv, scanner.ks
    if ks.size == 0:
        raise NoAdmissibleSplit("trimming excludes every candidate threshold")
    ssr, _ = scanner.ssr(design.targets[None, :])
    pick = _pick_split(ssr[0], scanner.ok)
    if pick is None:
        raise NoAdmissibleSplit("every admissible split is rank deficient")
    k = ks[pick]
    mode = cfg.threshold_mode
    threshold = float(tv[k]) if mode is ThresholdMode.TIME_INDEX else float(tv[k - 1])
    upper = _regime2_mask(design, threshold, mode)
    phi, beta, sigma2 = ols_fit(design, upper)
    _, sigma2_linear = _regime_ols(design.rows, design.targets)
    sigma2_linear /= design.n_rows
    # the chosen split nests the pooled fit; clamp rounding noise
    sigma2 = min(sigma2, sigma2_linear)
    if mode is ThresholdMode.TIME_INDEX:
        threshold_index = int(math.ceil(threshold))
    else:
        threshold_index = int(design.row_index[np.flatnonzero(upper)[0]])
    fit = TarFit(
        phi=phi,
        beta=beta,
        threshold=threshold,
        threshold_index=threshold_index,
        sigma2=sigma2,
        sigma2_linear=sigma2_linear,
        f_stat=_f_stat(design.n_rows, sigma2_linear, sigma2),
        p_value=math.nan,
        n_obs=design.n_rows,
        threshold_mode=mode,
    )
    if test:
        fit = _with_p_value(fit, significance_test(fit, design, cfg, seed=seed))
    return fit


def _with_p_value(fit, p_value):
    return replace(fit, p_value=float(p_value))


def significance_test(fit, design, cfg, seed=None):
    """Fixed-regressor bootstrap p-value of the sup-F linearity statistic.

    Each replicate keeps the regressors fixed and draws targets as the pooled
    AR fit's fitted values plus residuals resampled with replacement, then
    recomputes the sup-F statistic over the same admissible splits.
    """
    if not fit.f_stat > 0:
        return 1.0
    scanner = _SplitScanner(design, cfg)
    if scanner.ks.size == 0:
        return 1.0
    rows, targets = _centered(design)
    coef = _spd_solve(rows.T @ rows, rows.T @ targets)
    fitted = rows @ coef + scanner.shift
    resid = targets - rows @ coef
    n_rows = design.n_rows
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    exceed = 0
    remaining = cfg.bootstrap_reps
    while remaining:
        b = min(remaining, _BOOT_CHUNK)
        remaining -= b
        draws = rng.integers(0, n_rows, size=(b, n_rows))
        ystar = fitted[None, :] + resid[draws]
        ssr, ssr_linear = scanner.ssr(ystar)
        ssr_min = np.min(np.where(scanner.ok[None, :], ssr, np.inf), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fstar = np.where(
                ssr_min > 0,
                n_rows * (ssr_linear - ssr_min) / ssr_min,
                np.where(ssr_linear > 0, np.inf, 0.0),
            )
        exceed += int(np.sum(fstar >= fit.f_stat))
    return exceed / cfg.bootstrap_reps


def subsample_ci(series, cfg, fit, level):
    """Confidence interval for the threshold from contiguous-block subsampling.

    Blocks hold ``ceil(n_obs ** subsample_exponent)`` rows.  In time-index mode
    the blocks are placed so the estimated change point stays inside each
    block's admissible region; deviations of the block estimates from the
    full-sample threshold give a symmetric interval around it.  In
    self-exciting mode blocks tile the whole series and deviations are
    rescaled by ``block / n_obs`` to account for the faster convergence rate.
    """
    if not 0.0 < level < 1.0:
        raise BadParam("level must lie in (0, 1)")
    if not isinstance(series, ErrorSeries):
        series = ErrorSeries(series)
    p = cfg.p
    block = math.ceil(fit.n_obs ** cfg.subsample_exponent)
    m_block = min_regime_rows(block, cfg)
    span = block + p
    n = len(series)
    if block < 2 * m_block or span < min_series_length(cfg) or span > n:
        raise SeriesTooShort(f"subsample of {block} rows cannot hold two regimes")

    if cfg.threshold_mode is ThresholdMode.TIME_INDEX:
        pos = fit.threshold_index - series.start_index
        lo = max(pos - span + m_block, 0)
        hi = min(pos - p - m_block, n - span)
        scale = 1.0
    else:
        lo, hi = 0, n - span
        scale = block / fit.n_obs
    if hi < lo:
        raise SeriesTooShort("no subsample can contain the estimated threshold")
    starts = np.round(np.linspace(lo, hi, cfg.ci_subsamples)).astype(int)

    deviations = []
    for s in starts:
        sub = ErrorSeries(series.values[s : s + span], start_index=series.start_index + s)
        try:
            sub_fit = fit_tar(sub, cfg, test=False)
        except (NoAdmissibleSplit, RankDeficient):
            continue
        deviations.append(scale * (sub_fit.threshold - fit.threshold))
    if not deviations:
        raise SeriesTooShort("no subsample produced an admissible fit")
    radius = float(np.quantile(np.abs(deviations), level, method="higher"))
    return ThresholdCI(
        lower=fit.threshold - radius,
        upper=fit.threshold + radius,
        nominal_level=level,
        subsample_size=block,
        n_subsamples=len(deviations),
    )
