"""Drift events and their JSON-lines serialisation."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .setar import ThresholdCI


@dataclass
class DriftEvent:
    """A detected drift.

    ``stream_index`` is where the detector places the change; ``detected_at_index``
    is the sample at which the alarm fired.  Baseline detectors cannot localise
    a change, so for them both indices coincide.
    """

    detector_id: str
    stream_index: int
    detected_at_index: int
    severity: float | None = None
    ci: ThresholdCI | None = None
    compute_time: float = 0.0
    p_value: float | None = None

    def __post_init__(self):
        if self.stream_index > self.detected_at_index:
            raise ValueError("a drift cannot be located after its alarm")

    def to_dict(self):
        return {
            "detector_id": self.detector_id,
            "stream_index": int(self.stream_index),
            "detected_at_index": int(self.detected_at_index),
            "severity": None if self.severity is None else float(self.severity),
            "ci_lower": None if self.ci is None else float(self.ci.lower),
            "ci_upper": None if self.ci is None else float(self.ci.upper),
            "compute_time": float(self.compute_time),
        }

    def same_detection(self, other):
        """Equality on every field except the wall-clock ``compute_time``."""
        a, b = self.to_dict(), other.to_dict()
        a.pop("compute_time")
        b.pop("compute_time")
        return a == b and self.p_value == other.p_value


def write_jsonl(events, fh):
    for event in events:
        fh.write(json.dumps(event.to_dict()) + "\n")


def read_jsonl(fh):
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        data = json.loads(line)
        ci = None
        if data.get("ci_lower") is not None:
            ci = ThresholdCI(data["ci_lower"], data["ci_upper"], float("nan"), 0, 0)
        out.append(
            DriftEvent(
                detector_id=data["detector_id"],
                stream_index=data["stream_index"],
                detected_at_index=data["detected_at_index"],
                severity=data.get("severity"),
                ci=ci,
                compute_time=data.get("compute_time", 0.0),
            )
        )
    return out
