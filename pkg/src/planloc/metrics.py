"""Localization error metrics, recall tables, and evaluation reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .errors import DomainError
from .geometry import Pose2, normalize_angle

POS_THRESHOLDS_M = (1.0, 3.0, 5.0)
ANG_THRESHOLDS_DEG = (1.0, 3.0, 5.0)


@dataclass(frozen=True)
class PoseErrors:
    """Pose error split into the paper-style reporting components.

    lateral/longitudinal are the position error perpendicular/parallel to
    the ground-truth viewing axis; lateral^2 + longitudinal^2 equals
    position^2 up to rounding.
    """

    position_m: float
    orientation_deg: float
    lateral_m: float
    longitudinal_m: float


def pose_errors(est: Pose2, gt: Pose2) -> PoseErrors:
    ex = est.x - gt.x
    ey = est.y - gt.y
    c, s = math.cos(gt.theta), math.sin(gt.theta)
    longitudinal = abs(ex * c + ey * s)
    lateral = abs(ex * s - ey * c)
    return PoseErrors(
        position_m=math.hypot(ex, ey),
        orientation_deg=abs(math.degrees(normalize_angle(est.theta - gt.theta))),
        lateral_m=lateral,
        longitudinal_m=longitudinal,
    )


def recall_table(errors: list, pos_thresholds=POS_THRESHOLDS_M,
                 ang_thresholds=ANG_THRESHOLDS_DEG) -> dict:
    """Recall percentages (inclusive thresholds) per error component.

    Returns {"position": {t: pct}, "lateral": ..., "longitudinal": ...,
    "orientation": ...} with thresholds in meters (degrees for
    orientation) and values in percent.
    """
    if not errors:
        raise DomainError("recall over an empty error list")
    n = len(errors)

    def pct(values, t):
        return 100.0 * sum(1 for v in values if v <= t) / n

    comps = {
        "position": ([e.position_m for e in errors], pos_thresholds),
        "lateral": ([e.lateral_m for e in errors], pos_thresholds),
        "longitudinal": ([e.longitudinal_m for e in errors], pos_thresholds),
        "orientation": ([e.orientation_deg for e in errors], ang_thresholds),
    }
    return {
        name: {float(t): pct(vals, t) for t in thresholds}
        for name, (vals, thresholds) in comps.items()
    }


def write_report(f, trials: list, recall: dict):
    """Line-delimited JSON: one record per trial plus a summary record.

    trials: list of (label, PoseErrors). The summary repeats the recall
    table and the trial count.
    """
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "w")
        close = True
    try:
        for label, err in trials:
            rec = {"kind": "trial", "label": str(label)}
            rec.update(asdict(err))
            f.write(json.dumps(rec, sort_keys=True) + "\n")
        summary = {
            "kind": "summary",
            "count": len(trials),
            "recall_pct": {k: {str(t): v for t, v in tab.items()} for k, tab in recall.items()},
        }
        f.write(json.dumps(summary, sort_keys=True) + "\n")
    finally:
        if close:
            f.close()


def read_report(f) -> tuple:
    """Inverse of :func:`write_report`: returns (trials, summary dict)."""
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "r")
        close = True
    trials = []
    summary = None
    try:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("kind") == "summary":
                summary = rec
            else:
                trials.append(
                    (
                        rec["label"],
                        PoseErrors(
                            rec["position_m"],
                            rec["orientation_deg"],
                            rec["lateral_m"],
                            rec["longitudinal_m"],
                        ),
                    )
                )
    finally:
        if close:
            f.close()
    return trials, summary
