"""Per-frame wall extraction and per-echo MI diagnosis."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import active, chanvese, motion, ridge
from .errors import ActivePolyError, ConfigError, GeometryError, UnprocessableFrameError
from .imaging import EchoSequence, Frame, Landmarks, smooth
from .validation import check_choice, check_count, check_fraction

STAGES = ("ridge", "wall", "snake", "active")


def default_snake_params() -> chanvese.ChanVeseParams:
    """Solver defaults with early stopping once the front has settled."""
    return chanvese.ChanVeseParams(converge_window=30)


@dataclass(frozen=True)
class PipelineConfig:
    chanvese: chanvese.ChanVeseParams = field(default_factory=default_snake_params)
    lambda_rp: float = 0.1
    lambda_ap: float = 0.1
    wall_thickness: int = 6
    wall_ramp: tuple = ridge.WALL_RAMP
    delta_frac: float = 0.6
    n_s: int = 5
    norm: str = "L2"
    threshold: float = motion.DEFAULT_THRESHOLD
    lvef_high: float = motion.LVEF_HIGH
    lvef_low: float = motion.LVEF_LOW
    pairing: tuple = motion.DEFAULT_PAIRING
    smooth_sigma: float = 1.0
    init_scale: float = 0.5
    cap_fraction: float = active.CAP_FRACTION
    apex_radius: int = 12
    ridge_min_contrast: float = 10.0
    domain_margin: int = 20
    paint: bool = True
    landmark_tol: float = 0.025
    ap_tol: float = 0.015
    min_processed: float = 0.8

    def __post_init__(self):
        try:
            check_fraction(self.threshold, "threshold")
            check_fraction(self.delta_frac, "delta_frac")
            check_fraction(self.init_scale, "init_scale")
            check_fraction(self.cap_fraction, "cap_fraction")
            check_fraction(self.min_processed, "min_processed", open_high=False)
            check_fraction(self.landmark_tol, "landmark_tol")
            check_fraction(self.ap_tol, "ap_tol")
            check_choice(self.norm, "norm", motion.NORMS)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 < self.lvef_low < self.lvef_high < 1:
            raise ConfigError(f"gates must satisfy 0 < low < high < 1, "
                              f"got {self.lvef_low}, {self.lvef_high}")
        if self.lambda_rp < 0 or self.lambda_ap < 0:
            raise ConfigError("regularization weights must be >= 0")
        if int(self.wall_thickness) < 1 or int(self.n_s) < 2:
            raise ConfigError("wall_thickness must be >= 1 and n_s >= 2")
        pairing = tuple(tuple(int(s) for s in p) for p in self.pairing)
        for left, right in pairing:
            if left not in (1, 2, 3) or right not in (5, 6, 7):
                raise ConfigError(f"pairs join a left (1-3) and a right (5-7) segment, got {(left, right)}")
        object.__setattr__(self, "pairing", pairing)
        object.__setattr__(self, "wall_ramp", tuple(self.wall_ramp))
        if isinstance(self.chanvese, dict):
            object.__setattr__(self, "chanvese", chanvese.ChanVeseParams(**self.chanvese))

    @classmethod
    def from_dict(cls, data) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("pipeline config must be a JSON object")
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown pipeline config keys {unknown}")
        cv = data.pop("chanvese", {})
        try:
            if isinstance(cv, dict):
                cv = default_snake_params().with_(**cv)
            return cls(chanvese=cv, **data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pairing"] = [list(p) for p in self.pairing]
        d["wall_ramp"] = list(self.wall_ramp)
        return d

    def with_(self, **kw) -> "PipelineConfig":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class FrameResult:
    segments: active.SegmentModel
    area: int
    wall_frame: Frame
    rps: ridge.RidgePolynomialPair
    aps: active.ActivePolynomialPair
    contour: np.ndarray
    apex: tuple
    timing_ms: dict

    def __iter__(self):
        return iter((self.segments, self.area, self.wall_frame))


def _polygon_centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-9:
        return poly.mean(axis=0)
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def snake_init(rps: ridge.RidgePolynomialPair, scale=0.5) -> np.ndarray:
    """The RP arch closed across the base, shrunk by ``scale`` toward its centroid."""
    y0, y1 = rps.y_range
    ys = np.linspace(y0, y1, max(8, int(np.ceil(y1 - y0)) + 1))
    xl, xr = rps.left(ys), rps.right(ys)
    mid = 0.5 * (xl + xr)
    xl, xr = np.minimum(xl, mid), np.maximum(xr, mid)
    poly = np.vstack([np.column_stack([xl[::-1], ys[::-1]]), np.column_stack([xr[1:], ys[1:]])])
    c = _polygon_centroid(poly)
    return c + scale * (poly - c)


def _stage(name, frame_index, timing, fn, *args):
    t0 = time.perf_counter()
    try:
        return fn(*args)
    except (ActivePolyError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, UnprocessableFrameError):
            raise
        raise UnprocessableFrameError(frame_index, name, exc) from exc
    finally:
        timing[name] = (time.perf_counter() - t0) * 1000.0


def _ridge_stage(frame, landmarks, config):
    sm = smooth(frame, config.smooth_sigma)
    lines = ridge.fit_guide_lines(landmarks)
    anchors = ridge.place_anchor_points(lines)
    bands = ridge.stretch_anchors(anchors, config.delta_frac, frame.width, lines)
    points = {}
    for side in ("left", "right"):
        inner, outer = bands[side]
        roi = ridge.build_roi(inner, outer, config.lambda_rp, side)
        points[side] = ridge.detect_ridge_points(sm, roi, anchors.side(side), config.ridge_min_contrast)
    apex = ridge.refine_apex(sm, landmarks.apex_seed, config.apex_radius)
    if apex[1] >= min(landmarks.start[1], landmarks.end[1]):
        raise GeometryError("refined apex is not above the basal landmarks")
    rps = ridge.fit_ridge_polynomials(points["left"], points["right"], config.lambda_rp,
                                      apex=apex, y_range=(apex[1], landmarks.base_y))
    return rps, apex


def run_snake(wall_frame, rps, apex, config: PipelineConfig = PipelineConfig()):
    """Evolve the snake on a crop around the ridge polynomials.

    Returns the evolved field and the ``(x, y)`` offset of the crop in the
    frame.  The crop spans the apex row minus ``domain_margin`` down to the
    base row, and ``wall_thickness + domain_margin`` beyond each ridge.
    """
    h, w = wall_frame.shape
    init = snake_init(rps, config.init_scale)
    margin = int(config.domain_margin)
    reach = int(config.wall_thickness) + margin
    ys = np.arange(int(np.ceil(rps.y_range[0])), int(np.floor(rps.y_range[1])) + 1)
    y0 = max(int(apex[1]) - margin, 0)
    y1 = min(int(np.floor(rps.y_range[1])), h - 1)
    x0 = max(int(np.floor(rps.left(ys).min())) - reach, 0)
    x1 = min(int(np.ceil(rps.right(ys).max())) + reach, w - 1)
    sub = wall_frame.pixels[y0:y1 + 1, x0:x1 + 1]
    offset = np.array([x0, y0], dtype=float)
    field0 = chanvese.initialize_levelset(init - offset, sub.shape)
    return chanvese.evolve(field0, sub, config.chanvese), offset


def _snake_stage(wall_frame, rps, apex, config):
    evolved, offset = run_snake(wall_frame, rps, apex, config)
    return chanvese.extract_contour(evolved) + offset


def _base_point(contour, rps, y, side, apex_x, band=1.5):
    """Outermost contour point on the base row ``y`` on one side of the apex.

    Falls back to the ridge polynomial when the contour does not reach the row.
    """
    near = contour[np.abs(contour[:, 1] - y) <= band]
    if side == "left":
        near = near[near[:, 0] < apex_x]
        if len(near):
            return tuple(near[np.argmin(near[:, 0])])
        return float(rps.left(y)), float(y)
    near = near[near[:, 0] > apex_x]
    if len(near):
        return tuple(near[np.argmax(near[:, 0])])
    return float(rps.right(y)), float(y)


def _active_stage(contour, rps, apex, landmarks, config, frame_index):
    apex = (float(apex[0]), float(apex[1]))
    start = _base_point(contour, rps, landmarks.start[1], "left", apex[0])
    end = _base_point(contour, rps, landmarks.end[1], "right", apex[0])
    # tolerances are relative to the apex-to-base length
    length = landmarks.base_y - apex[1]
    tol = config.landmark_tol * length
    left, right = active.sample_snake_points(contour, start, apex, end, active.SNAKE_POINTS, tol)
    start, end = tuple(left[0]), tuple(right[-1])
    aps = active.fit_active_polynomials(left, right, start, apex, end, config.lambda_ap,
                                        config.ap_tol * length)
    segments = active.partition_segments(aps, frame_index, config.cap_fraction)
    return aps, segments, active.chamber_area(aps)


def process_frame(frame: Frame, landmarks: Landmarks, config: PipelineConfig = PipelineConfig(),
                  frame_index=0) -> FrameResult:
    """Ridge polynomials, painted wall, snake and active polynomials for one frame.

    Any failure is re-raised as :class:`UnprocessableFrameError` naming the
    stage.
    """
    landmarks.check_bounds(frame.width, frame.height)
    timing = {}
    rps, apex = _stage("ridge", frame_index, timing, _ridge_stage, frame, landmarks, config)
    if config.paint:
        wall_frame = _stage("wall", frame_index, timing, ridge.paint_wall, frame, rps,
                            int(config.wall_thickness), config.wall_ramp)
    else:
        wall_frame = frame
        timing["wall"] = 0.0
    contour = _stage("snake", frame_index, timing, _snake_stage, wall_frame, rps, apex, config)
    aps, segments, area = _stage("active", frame_index, timing, _active_stage, contour, rps, apex,
                                 landmarks, config, frame_index)
    return FrameResult(segments=segments, area=area, wall_frame=wall_frame, rps=rps, aps=aps,
                       contour=contour, apex=apex, timing_ms=timing)


@dataclass(frozen=True, eq=False)
class EchoReport:
    id: str
    n_frames: int
    diagnosis: Optional[motion.Diagnosis]
    curves: tuple
    models: tuple
    areas: tuple
    timing_ms: dict
    failures: dict
    frames: tuple = ()
    error: Optional[str] = None

    @property
    def processed(self) -> int:
        return self.n_frames - len(self.failures)

    @property
    def ok(self) -> bool:
        return self.diagnosis is not None

    def max_frames(self) -> dict:
        return {c.segment_id: c.max_frame for c in self.curves}

    def curve_table(self) -> list:
        """Rows ``[frame, d1, d2, d3, d5, d6, d7]``; ``None`` where a frame failed."""
        cols = {c.segment_id: dict(zip(c.frames.tolist(), c.values.tolist())) for c in self.curves}
        rows = []
        for t in range(self.n_frames):
            rows.append([t] + [cols.get(s, {}).get(t) for s in active.ANALYZED_SEGMENTS])
        return rows

    def to_dict(self) -> dict:
        d = self.diagnosis
        return {
            "schema": 1,
            "id": self.id,
            "lvef": None if d is None else d.lvef,
            "gate": None if d is None else d.gate,
            "echo_label": None if d is None else d.echo_label,
            "segments": [] if d is None else [
                {"id": v.segment_id, "ratio": v.ratio, "label": v.label} for v in d.verdicts],
            "max_frames": {str(k): v for k, v in self.max_frames().items()},
            "timing_ms": {k: round(v, 3) for k, v in self.timing_ms.items()},
            "frames": self.n_frames,
            "processed": self.processed,
            "areas": list(self.areas),
            "failures": [{"frame": k, "stage": v[0], "reason": v[1]}
                         for k, v in sorted(self.failures.items())],
            "error": self.error,
        }


def analyze_results(id, n_frames, results: dict, failures: dict, timing: dict,
                    config: PipelineConfig = PipelineConfig()) -> EchoReport:
    """Aggregate per-frame results (keyed by frame index) into an echo report."""
    order = sorted(results)
    models = tuple(results[t].segments for t in order)
    areas = tuple(results[t].area if t in results else None for t in range(n_frames))
    frames = tuple(results.get(t) for t in range(n_frames))
    processed = len(order) / n_frames
    if 0 not in results or processed < config.min_processed:
        why = ("the end-diastolic frame failed" if 0 not in results
               else f"only {len(order)} of {n_frames} frames were processed")
        return EchoReport(id, n_frames, None, (), models, areas, timing, failures, frames, why)
    lvef = motion.compute_lvef([results[t].area for t in order])
    curves = tuple(motion.build_displacement_curves(models, config.n_s, config.norm))

    def verdicts():
        intervals = motion.min_pair_interval(models, config.pairing, config.n_s, config.norm)
        return motion.classify_segments(curves, intervals, config.pairing, config.threshold)

    diagnosis = motion.diagnose(lvef, verdicts, config.lvef_high, config.lvef_low)
    return EchoReport(id, n_frames, diagnosis, curves, models, areas, timing, failures, frames)


def _run_frame(frame, landmarks, config, t):
    try:
        return process_frame(frame, landmarks, config, t)
    except UnprocessableFrameError as exc:
        return exc


def process_echo(seq: EchoSequence, config: PipelineConfig = PipelineConfig(),
                 keep_frames=False, n_jobs=1) -> EchoReport:
    """Run every frame, then gate on LVEF and analyse the wall motion.

    Failed frames are recorded with their stage and reason.  A diagnosis is
    produced only when the first frame and at least ``min_processed`` of
    all frames succeed.  With ``n_jobs > 1`` frames run on a thread pool;
    the result does not depend on ``n_jobs``.
    """
    n_jobs = check_count(n_jobs, "n_jobs")
    results, failures = {}, {}
    timing = {s: 0.0 for s in STAGES}
    t0 = time.perf_counter()
    args = [(frame, seq.landmarks, config, t) for t, frame in enumerate(seq.frames)]
    if n_jobs == 1:
        outcomes = [_run_frame(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(lambda a: _run_frame(*a), args))
    for t, res in enumerate(outcomes):
        if isinstance(res, UnprocessableFrameError):
            failures[t] = (res.stage, res.reason)
            continue
        for k, v in res.timing_ms.items():
            timing[k] += v
        results[t] = res
    timing["total"] = (time.perf_counter() - t0) * 1000.0
    timing["per_frame"] = timing["total"] / len(seq)
    report = analyze_results(seq.id, len(seq), results, failures, timing, config)
    if not keep_frames:
        report = replace(report, frames=())
    return report
