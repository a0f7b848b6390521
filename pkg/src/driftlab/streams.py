"""Synthetic drifting streams with ground-truth manifests, plus CSV ingestion.

Families
--------
``friedman`` / ``friedman_no_return``
    Ten uniform features; target ``10 sin(pi a b) + 20 (c - 0.5)^2 + 10 d + 5 e``
    plus Gaussian noise, where the roles ``a..e`` are filled by a
    concept-specific permutation of the feature columns.  The plain variant
    returns to concept 0; the no-return variant never revisits a concept.
``brieman_2d_planes``
    Piecewise-linear target selected by the sign of ``x1``; concepts negate
    the coefficients of one of the two planes.
``mixed``
    Two booleans and two uniforms; class 1 iff at least two of
    ``{v, w, y < 0.5 + 0.3 sin(3 pi x)}`` hold.  Concept 1 inverts the rule.
``agrawal_32`` / ``agrawal_3213``
    Nine loan-application attributes labelled by one of the ten classic
    Agrawal functions; the concept id is the function number.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParam, BadSpec, IoError, MissingColumn, ParseError

__all__ = [
    "DriftSchedule",
    "Family",
    "GeneratorSpec",
    "Normalization",
    "StreamRecord",
    "Transition",
    "default_schedule",
    "generate",
    "ingest_csv",
    "read_manifest",
    "read_stream_csv",
    "records_to_arrays",
    "write_manifest",
    "write_stream_csv",
]


@dataclass(frozen=True)
class StreamRecord:
    features: tuple
    target: float
    index: int
    concept_id: int = -1


class Transition(str, enum.Enum):
    ABRUPT = "abrupt"
    GRADUAL = "gradual"


@dataclass(frozen=True)
class DriftSchedule:
    """Change points, transition shape and the concept active in each segment."""

    change_points: tuple
    concept_sequence: tuple
    transition: Transition = Transition.ABRUPT
    width: int = 0

    def __post_init__(self):
        cps = tuple(int(c) for c in self.change_points)
        seq = tuple(int(c) for c in self.concept_sequence)
        object.__setattr__(self, "change_points", cps)
        object.__setattr__(self, "concept_sequence", seq)
        try:
            object.__setattr__(self, "transition", Transition(self.transition))
        except ValueError:
            raise BadSpec(f"unknown transition {self.transition!r}") from None
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise BadSpec("change points must be strictly increasing")
        if cps and cps[0] < 1:
            raise BadSpec("change points must be positive")
        if len(seq) != len(cps) + 1:
            raise BadSpec("concept_sequence needs exactly one more entry than change_points")
        if self.transition is Transition.GRADUAL:
            if self.width < 1:
                raise BadSpec("gradual transitions need a positive width")
            gaps = [b - a for a, b in zip(cps, cps[1:])]
            if gaps and self.width >= min(gaps):
                raise BadSpec("gradual width must be smaller than the gap between change points")
        elif self.width:
            raise BadSpec("abrupt transitions take no width")

    def to_dict(self):
        return {
            "change_points": list(self.change_points),
            "transition": {"kind": self.transition.value, "width": int(self.width)},
            "concept_sequence": list(self.concept_sequence),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            trans = data.get("transition", "abrupt")
            kind, width = (trans["kind"], trans.get("width", 0)) if isinstance(trans, dict) else (trans, 0)
            return cls(data["change_points"], data["concept_sequence"], kind, int(width))
        except (KeyError, TypeError, ValueError) as exc:
            raise BadSpec(f"malformed schedule: {exc}") from None


class Family(str, enum.Enum):
    FRIEDMAN = "friedman"
    FRIEDMAN_NO_RETURN = "friedman_no_return"
    BRIEMAN_2D_PLANES = "brieman_2d_planes"
    MIXED = "mixed"
    AGRAWAL_32 = "agrawal_32"
    AGRAWAL_3213 = "agrawal_3213"


# Feature columns filling the Friedman roles (a, b, c, d, e), per concept.
# Odd concepts move every role onto formerly irrelevant columns (severe);
# even ones swap a pair of roles (mild).
FRIEDMAN_ROLES = (
    (0, 1, 2, 3, 4),
    (5, 6, 7, 8, 9),
    (0, 1, 2, 4, 3),
    (6, 7, 8, 9, 5),
    (0, 1, 3, 2, 4),
    (7, 8, 9, 5, 6),
    (0, 1, 2, 3, 5),
)

_DEFAULT_SEQUENCE = {
    Family.FRIEDMAN: (0, 1, 2, 0),
    Family.FRIEDMAN_NO_RETURN: (0, 1, 2, 3, 4, 5, 6),
    Family.BRIEMAN_2D_PLANES: (0, 1, 0, 2, 0, 1, 0),
    Family.MIXED: (0, 1, 0, 1),
    Family.AGRAWAL_32: (3, 2),
    Family.AGRAWAL_3213: (3, 2, 1, 3, 2),
}

_CONCEPTS = {
    Family.FRIEDMAN: range(len(FRIEDMAN_ROLES)),
    Family.FRIEDMAN_NO_RETURN: range(len(FRIEDMAN_ROLES)),
    Family.BRIEMAN_2D_PLANES: range(3),
    Family.MIXED: range(2),
    Family.AGRAWAL_32: range(1, 11),
    Family.AGRAWAL_3213: range(1, 11),
}

_REGRESSION = {Family.FRIEDMAN, Family.FRIEDMAN_NO_RETURN, Family.BRIEMAN_2D_PLANES}


def is_regression(family):
    return Family(family) in _REGRESSION


def default_schedule(family, n_samples):
    """Evenly spaced abrupt drifts, with the family's default concept order."""
    seq = _DEFAULT_SEQUENCE[Family(family)]
    m = len(seq) - 1
    cps = [n_samples * k // (m + 1) for k in range(1, m + 1)]
    return DriftSchedule(cps, seq)


@dataclass(frozen=True)
class GeneratorSpec:
    """What to generate.

    ``noise_sigma`` is the Gaussian target noise for regression families and
    the label-flip probability for classification families; ``None`` picks
    1.0 and 0.0 respectively.  ``schedule=None`` uses :func:`default_schedule`.
    """

    family: Family
    n_samples: int
    seed: int = 0
    noise_sigma: float | None = None
    schedule: DriftSchedule | None = None

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise BadSpec(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        if self.n_samples < 1:
            raise BadSpec("n_samples must be positive")
        if self.noise_sigma is None:
            object.__setattr__(self, "noise_sigma", 1.0 if family in _REGRESSION else 0.0)
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise BadSpec("noise_sigma must be a finite non-negative number")
        if family not in _REGRESSION and self.noise_sigma > 0.5:
            raise BadSpec("label-flip probability must be at most 0.5")
        if self.schedule is None:
            object.__setattr__(self, "schedule", default_schedule(family, self.n_samples))
        sched = self.schedule
        if sched.change_points and sched.change_points[-1] >= self.n_samples:
            raise BadSpec("n_samples must exceed the last change point")
        if sched.transition is Transition.GRADUAL and sched.change_points:
            if sched.change_points[-1] + sched.width > self.n_samples:
                raise BadSpec("the last gradual transition runs past the end of the stream")
        allowed = _CONCEPTS[family]
        bad = [c for c in sched.concept_sequence if c not in allowed]
        if bad:
            raise BadSpec(f"concept ids {bad} are not defined for {family.value}")
        if family is Family.FRIEDMAN_NO_RETURN and len(set(sched.concept_sequence)) != len(sched.concept_sequence):
            raise BadSpec("the no-return family never revisits a concept")

    def to_dict(self):
        return {
            "family": self.family.value,
            "n_samples": int(self.n_samples),
            "seed": int(self.seed),
            "noise_sigma": float(self.noise_sigma),
            "schedule": self.schedule.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            schedule = data.get("schedule")
            return cls(
                data["family"],
                int(data["n_samples"]),
                int(data.get("seed", 0)),
                data.get("noise_sigma"),
                None if schedule is None else DriftSchedule.from_dict(schedule),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BadSpec(f"malformed generator spec: {exc}") from None


# -- concept assignment -----------------------------------------------------------


def _concept_per_sample(schedule, n, rng):
    seq = np.asarray(schedule.concept_sequence)
    idx = np.arange(n)
    segment = np.searchsorted(np.asarray(schedule.change_points, dtype=int), idx, side="right")
    if schedule.transition is Transition.GRADUAL:
        u = rng.uniform(size=n)
        for k, cp in enumerate(schedule.change_points):
            ramp = (idx >= cp) & (idx < cp + schedule.width)
            p_new = (idx[ramp] - cp + 0.5) / schedule.width
            segment[ramp] = np.where(u[ramp] < p_new, k + 1, k)
    return seq[segment]


# -- families ---------------------------------------------------------------------


def _friedman(rng, concepts, sigma):
    n = concepts.size
    X = rng.uniform(size=(n, 10))
    roles = np.asarray(FRIEDMAN_ROLES)[concepts]
    a, b, c, d, e = (np.take_along_axis(X, roles[:, [j]], axis=1)[:, 0] for j in range(5))
    y = 10 * np.sin(np.pi * a * b) + 20 * (c - 0.5) ** 2 + 10 * d + 5 * e
    return X, y + sigma * rng.standard_normal(n)


def _brieman(rng, concepts, sigma):
    n = concepts.size
    x1 = rng.choice([-1.0, 1.0], size=n)
    rest = rng.integers(-1, 2, size=(n, 9)).astype(float)
    X = np.column_stack([x1, rest])
    sign_a = np.where(concepts == 1, -1.0, 1.0)
    sign_b = np.where(concepts == 2, -1.0, 1.0)
    plane_a = sign_a * (3 + 3 * X[:, 1] + 2 * X[:, 2] + X[:, 3])
    plane_b = sign_b * (-3 + 3 * X[:, 4] + 2 * X[:, 5] + X[:, 6])
    y = np.where(x1 > 0, plane_a, plane_b)
    return X, y + sigma * rng.standard_normal(n)


def _flip(rng, y, prob):
    if prob <= 0:
        return y
    return np.where(rng.uniform(size=y.size) < prob, 1.0 - y, y)


def _mixed(rng, concepts, flip):
    n = concepts.size
    v = (rng.uniform(size=n) < 0.5).astype(float)
    w = (rng.uniform(size=n) < 0.5).astype(float)
    x = rng.uniform(size=n)
    yv = rng.uniform(size=n)
    z = yv < 0.5 + 0.3 * np.sin(3 * np.pi * x)
    label = ((v + w + z) >= 2).astype(float)
    label = np.where(concepts == 1, 1.0 - label, label)
    return np.column_stack([v, w, x, yv]), _flip(rng, label, flip)


def _between(v, lo, hi):
    return (v >= lo) & (v <= hi)


def _agrawal_group_a(fn, salary, commission, age, elevel, car, zipcode, hvalue, hyears, loan):
    """Boolean mask of samples in group A (class 0) under Agrawal function ``fn``."""
    young, middle, old = age < 40, (age >= 40) & (age < 60), age >= 60
    if fn == 1:
        return young | old
    if fn == 2:
        return (
            (young & _between(salary, 50000, 100000))
            | (middle & _between(salary, 75000, 125000))
            | (old & _between(salary, 25000, 75000))
        )
    if fn == 3:
        return (young & (elevel <= 1)) | (middle & _between(elevel, 1, 3)) | (old & (elevel >= 2))
    if fn == 4:
        return (
            (young & np.where(elevel <= 1, _between(salary, 25000, 75000), _between(salary, 50000, 100000)))
            | (middle & np.where(_between(elevel, 1, 3), _between(salary, 50000, 100000), _between(salary, 75000, 125000)))
            | (old & np.where(elevel >= 2, _between(salary, 50000, 100000), _between(salary, 25000, 75000)))
        )
    if fn == 5:
        return (
            (young & np.where(_between(salary, 50000, 100000), _between(loan, 100000, 300000), _between(loan, 200000, 400000)))
            | (middle & np.where(_between(salary, 75000, 125000), _between(loan, 200000, 400000), _between(loan, 300000, 500000)))
            | (old & np.where(_between(salary, 25000, 75000), _between(loan, 300000, 500000), _between(loan, 100000, 300000)))
        )
    total = salary + commission
    if fn == 6:
        return (
            (young & _between(total, 50000, 100000))
            | (middle & _between(total, 75000, 125000))
            | (old & _between(total, 25000, 75000))
        )
    if fn == 7:
        return 2.0 / 3.0 * total - loan / 5.0 - 20000 > 0
    if fn == 8:
        return 2.0 / 3.0 * total - 5000 * elevel - 20000 > 0
    if fn == 9:
        return 2.0 / 3.0 * total - 5000 * elevel - loan / 5.0 - 10000 > 0
    equity = np.where(hyears >= 20, hvalue * 0.1 * (hyears - 20), 0.0)
    return 2.0 / 3.0 * total - 5000 * elevel + equity / 5.0 - 10000 > 0


def _agrawal(rng, concepts, flip):
    n = concepts.size
    salary = rng.uniform(20000, 150000, size=n)
    commission = np.where(salary >= 75000, 0.0, rng.uniform(10000, 75000, size=n))
    age = rng.integers(20, 81, size=n).astype(float)
    elevel = rng.integers(0, 5, size=n).astype(float)
    car = rng.integers(1, 21, size=n).astype(float)
    zipcode = rng.integers(0, 9, size=n).astype(float)
    hvalue = (9 - zipcode) * 100000 * rng.uniform(0.5, 1.5, size=n)
    hyears = rng.integers(1, 31, size=n).astype(float)
    loan = rng.uniform(0, 500000, size=n)
    cols = (salary, commission, age, elevel, car, zipcode, hvalue, hyears, loan)
    label = np.empty(n)
    for fn in np.unique(concepts):
        sel = concepts == fn
        label[sel] = np.where(_agrawal_group_a(int(fn), *(c[sel] for c in cols)), 0.0, 1.0)
    return np.column_stack(cols), _flip(rng, label, flip)


_GENERATORS = {
    Family.FRIEDMAN: _friedman,
    Family.FRIEDMAN_NO_RETURN: _friedman,
    Family.BRIEMAN_2D_PLANES: _brieman,
    Family.MIXED: _mixed,
    Family.AGRAWAL_32: _agrawal,
    Family.AGRAWAL_3213: _agrawal,
}


def generate_arrays(spec):
    """Array form of :func:`generate`: ``(X, y, concept_ids, schedule)``."""
    rng = np.random.default_rng(spec.seed)
    concepts = _concept_per_sample(spec.schedule, spec.n_samples, rng)
    X, y = _GENERATORS[spec.family](rng, concepts, spec.noise_sigma)
    return X, y, concepts, spec.schedule


def generate(spec):
    """Records and the ground-truth schedule for ``spec``; deterministic in ``spec.seed``."""
    X, y, concepts, schedule = generate_arrays(spec)
    records = [
        StreamRecord(tuple(row), float(t), i, int(c))
        for i, (row, t, c) in enumerate(zip(X.tolist(), y.tolist(), concepts.tolist()))
    ]
    return records, schedule


def records_to_arrays(records):
    """``(X, y, concept_ids)`` arrays from a list of records."""
    if not records:
        return np.empty((0, 0)), np.empty(0), np.empty(0, dtype=int)
    X = np.array([r.features for r in records], dtype=float)
    y = np.array([r.target for r in records], dtype=float)
    c = np.array([r.concept_id for r in records], dtype=int)
    return X, y, c


# -- files ------------------------------------------------------------------------


def write_stream_csv(path, records):
    """Header ``f0..f{k-1},target,concept_id``; floats written in round-trip form."""
    k = len(records[0].features) if records else 0
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"f{j}" for j in range(k)] + ["target", "concept_id"])
            for r in records:
                writer.writerow([repr(float(v)) for v in r.features] + [repr(float(r.target)), r.concept_id])
    except OSError as exc:
        raise IoError(str(exc)) from exc


def write_manifest(path, schedule):
    try:
        with open(path, "w") as fh:
            json.dump(schedule.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_manifest(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise BadSpec(f"manifest is not valid JSON: {exc}") from None
    return DriftSchedule.from_dict(data)


class Normalization(str, enum.Enum):
    NONE = "none"
    MINMAX = "minmax"
    ZSCORE = "zscore"


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not rows:
        raise ParseError("file is empty", row=0)
    return rows[0], rows[1:]


def _parse(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}, column {column!r}: {cell!r} is not a number", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {column!r}: value is not finite", row, column)
    return value


def ingest_csv(path, schema=None, target_column="target", normalization=Normalization.NONE, prefix=None):
    """Load a labelled CSV as records with ``concept_id = -1``.

    Parameters
    ----------
    schema : list of str, optional
        Feature columns in order; default is every column except the target
        and a ``concept_id`` column.
    normalization : Normalization
        Scaling applied to features using statistics of the first ``prefix``
        rows only, so no later row influences earlier ones.
    prefix : int
        Required when ``normalization`` is not ``none``.

    Rows are numbered from 1 for the first data line in error messages.
    """
    normalization = Normalization(normalization)
    header, rows = _read_rows(path)
    header = [h.strip() for h in header]
    if target_column not in header:
        raise MissingColumn(f"target column {target_column!r} not found")
    if schema is None:
        schema = [h for h in header if h not in (target_column, "concept_id")]
    missing = [c for c in schema if c not in header]
    if missing:
        raise MissingColumn(f"columns not found: {missing}")
    pos = [header.index(c) for c in schema]
    tpos = header.index(target_column)
    X = np.empty((len(rows), len(schema)))
    y = np.empty(len(rows))
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i} has {len(row)} fields, expected {len(header)}", row=i)
        for j, (name, p) in enumerate(zip(schema, pos)):
            X[i - 1, j] = _parse(row[p], i, name)
        y[i - 1] = _parse(row[tpos], i, target_column)
    if normalization is not Normalization.NONE:
        if prefix is None or not 1 <= prefix <= len(rows):
            raise BadParam("normalization needs a prefix length between 1 and the row count")
        head = X[:prefix]
        if normalization is Normalization.MINMAX:
            lo, span = head.min(axis=0), np.ptp(head, axis=0)
        else:
            lo, span = head.mean(axis=0), head.std(axis=0)
        span = np.where(span > 0, span, 1.0)
        X = (X - lo) / span
    return [StreamRecord(tuple(X[i].tolist()), float(y[i]), i, -1) for i in range(len(rows))]


def read_stream_csv(path):
    """Read a file written by :func:`write_stream_csv`, keeping concept ids."""
    header, rows = _read_rows(path)
    records = ingest_csv(path)
    if "concept_id" not in header:
        return records
    cpos = header.index("concept_id")
    return [
        StreamRecord(r.features, r.target, r.index, int(_parse(row[cpos], r.index + 1, "concept_id")))
        for r, row in zip(records, rows)
    ]
