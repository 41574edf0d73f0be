"""Wall-motion quantities: LVEF, segment displacement curves and the MI decision."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .active import ANALYZED_SEGMENTS, SegmentModel, resample
from .errors import GeometryError, ValidationError
from .validation import check_choice, check_count, check_fraction, check_points

NORMS = ("L1", "L2", "Linf")
DEFAULT_PAIRING = ((1, 7), (2, 6), (3, 5))
DEFAULT_THRESHOLD = 0.19
LVEF_HIGH = 0.55
LVEF_LOW = 0.15
# pair intervals at or below this many pixels count as touching walls
ZERO_INTERVAL = 1e-6

NORMAL = "normal"
INFARCTED = "infarcted"
MI = "MI"


def _norm(diff, norm):
    check_choice(norm, "norm", NORMS)
    diff = np.abs(np.asarray(diff, dtype=float))
    if norm == "L1":
        return diff.sum(axis=-1)
    if norm == "L2":
        return np.sqrt((diff ** 2).sum(axis=-1))
    return diff.max(axis=-1)


def point_distance(p1, p2, norm="L2") -> float:
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
        raise ValidationError("point coordinates must be finite")
    return float(_norm(p2 - p1, norm))


def matched_distance(a, b, n_s=5, norm="L2") -> float:
    """Mean distance between ``n_s`` index-matched equal-arc samples of two polylines."""
    check_count(n_s, "n_s")
    pa = resample(check_points(a, "polyline", 1), n_s)
    pb = resample(check_points(b, "polyline", 1), n_s)
    return float(np.mean(_norm(pb - pa, norm)))


def segment_displacement(seg_t0, seg_t, n_s=5, norm="L2") -> float:
    """Mean point-wise displacement of a segment relative to its reference shape."""
    return matched_distance(seg_t0, seg_t, n_s, norm)


@dataclass(frozen=True, eq=False)
class DisplacementCurve:
    segment_id: int
    values: np.ndarray
    frames: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True).ravel()
        if vals.size == 0:
            raise ValidationError("a displacement curve needs at least one value")
        if vals[0] != 0:
            raise ValidationError("displacement at the reference frame must be 0")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValidationError("displacements must be finite and non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        frames = np.arange(vals.size) if self.frames is None else np.asarray(self.frames, dtype=int)
        if frames.shape != vals.shape:
            raise ValidationError("frames and values must have the same length")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def max_frame(self) -> int:
        return int(self.frames[int(np.argmax(self.values))])


def _segment_ids(pairing):
    ids = [s for pair in pairing for s in pair]
    return [s for s in ANALYZED_SEGMENTS if s in ids]


def build_displacement_curves(models: Sequence[SegmentModel], n_s=5, norm="L2",
                              segments=ANALYZED_SEGMENTS) -> list:
    """One curve per analyzed segment, displacement relative to ``models[0]``."""
    if len(models) < 2:
        raise ValidationError("displacement curves need at least 2 frames")
    frames = np.array([m.frame_index for m in models])
    ref = models[0]
    curves = []
    for sid in segments:
        vals = [0.0] + [segment_displacement(ref[sid], m[sid], n_s, norm) for m in models[1:]]
        curves.append(DisplacementCurve(sid, vals, frames))
    return curves


def min_pair_interval(models: Sequence[SegmentModel], pairing=DEFAULT_PAIRING, n_s=5,
                      norm="L2") -> dict:
    """Minimum over frames of the mean distance between paired segments.

    The right segment of each pair is traversed in reverse so that sample
    ``k`` on the left wall faces sample ``k`` on the right wall.
    """
    if len(models) < 1:
        raise ValidationError("need at least one frame")
    out = {}
    for left, right in pairing:
        d = min(matched_distance(m[left], m[right][::-1], n_s, norm) for m in models)
        if d <= ZERO_INTERVAL:
            raise GeometryError(f"segments {left} and {right} touch (zero interval)")
        out[(left, right)] = d
    return out


def compute_lvef(areas) -> float:
    a = np.asarray(areas, dtype=float).ravel()
    if a.size == 0:
        raise ValidationError("need at least one area")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValidationError("areas must be finite and positive")
    return float(1.0 - a.min() / a.max())


@dataclass(frozen=True)
class SegmentVerdict:
    segment_id: int
    ratio: Optional[float]
    label: str
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        check_choice(self.label, "label", (NORMAL, INFARCTED))
        if self.ratio is not None:
            expected = INFARCTED if self.ratio < self.threshold else NORMAL
            if self.label != expected:
                raise ValidationError(
                    f"segment {self.segment_id}: ratio {self.ratio:.4f} implies {expected}")


def classify_segments(curves, intervals, pairing=DEFAULT_PAIRING,
                      threshold=DEFAULT_THRESHOLD) -> list:
    """Verdict per segment: infarcted iff max displacement / pair interval < threshold."""
    threshold = check_fraction(threshold, "threshold")
    by_id = {c.segment_id: c for c in curves}
    partner = {}
    for pair in pairing:
        if tuple(pair) not in intervals:
            raise ValidationError(f"no interval for pair {tuple(pair)}")
        for sid in pair:
            partner[sid] = tuple(pair)
    verdicts = []
    for sid in _segment_ids(pairing):
        if sid not in by_id:
            raise ValidationError(f"no displacement curve for segment {sid}")
        d_min = intervals[partner[sid]]
        ratio = by_id[sid].max_value / d_min
        label = INFARCTED if ratio < threshold else NORMAL
        verdicts.append(SegmentVerdict(sid, float(ratio), label, threshold))
    return verdicts


@dataclass(frozen=True)
class Diagnosis:
    lvef: float
    verdicts: tuple
    echo_label: str
    gate: str

    def __post_init__(self):
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        check_choice(self.gate, "gate", ("lvef_high", "lvef_low", "motion_analysis"))
        check_choice(self.echo_label, "echo_label", (NORMAL, MI))
        if not 0 <= self.lvef <= 1:
            raise ValidationError(f"lvef must lie in [0, 1], got {self.lvef}")

    def check(self, high=LVEF_HIGH, low=LVEF_LOW) -> "Diagnosis":
        """Raise :class:`ValidationError` if the gate invariants do not hold."""
        labels = [v.label for v in self.verdicts]
        if (self.gate == "lvef_high") != (self.lvef >= high):
            raise ValidationError("gate lvef_high must coincide with lvef >= high gate")
        if (self.gate == "lvef_low") != (self.lvef <= low):
            raise ValidationError("gate lvef_low must coincide with lvef <= low gate")
        if self.gate == "lvef_high" and (self.echo_label != NORMAL or INFARCTED in labels):
            raise ValidationError("lvef_high echos are normal with all segments normal")
        if self.gate == "lvef_low" and (self.echo_label != MI or NORMAL in labels):
            raise ValidationError("lvef_low echos are MI with all segments infarcted")
        if self.gate == "motion_analysis" and (self.echo_label == MI) != (INFARCTED in labels):
            raise ValidationError("MI must coincide with at least one infarcted segment")
        return self

    def segment_labels(self) -> dict:
        return {v.segment_id: v.label for v in self.verdicts}


def diagnose(lvef, verdicts_fn: Callable[[], list], high=LVEF_HIGH, low=LVEF_LOW,
             segments=ANALYZED_SEGMENTS) -> Diagnosis:
    """Gate on LVEF; ``verdicts_fn`` is called only between the gates."""
    lvef = float(lvef)
    if not 0 <= lvef <= 1:
        raise ValidationError(f"lvef must lie in [0, 1], got {lvef}")
    if not 0 < low < high < 1:
        raise ValidationError(f"gates must satisfy 0 < low < high < 1, got {low}, {high}")
    if lvef >= high:
        verdicts = [SegmentVerdict(s, None, NORMAL) for s in segments]
        return Diagnosis(lvef, verdicts, NORMAL, "lvef_high")
    if lvef <= low:
        verdicts = [SegmentVerdict(s, None, INFARCTED) for s in segments]
        return Diagnosis(lvef, verdicts, MI, "lvef_low")
    verdicts = list(verdicts_fn())
    label = MI if any(v.label == INFARCTED for v in verdicts) else NORMAL
    return Diagnosis(lvef, verdicts, label, "motion_analysis")
