"""Synthetic apical 4-chamber sequences with analytically known LV walls.

The endocardial boundary of frame ``t`` is the pair of curves

    x = cx -/+ h(y) * (1 - A * c(t) * m(y)),   apex_y <= y <= base_y

where ``h(y) = H * ((1 + b) s - b s^2)`` with ``s = (y - apex_y) / L`` is a
quadratic arch (so a quartic fits it exactly), ``c(t)`` is a raised-cosine
contraction that is 0 at both ends of the cycle and 1 at frame
``frames // 2``, ``A`` is the contraction amplitude and ``m(y)`` is the
per-segment motion scale.  Segments are assigned along the end-diastolic
boundary with the same equal-arc partition the pipeline uses, and ``m`` is
blended linearly across a short band at each segment boundary.

The image shows a dark cavity, a bright wall whose intensity peaks on the
endocardial boundary and fades outward over ``wall_thickness`` pixels, and
a mid-gray background.  Speckle is multiplicative: each pixel is scaled by
``1 + (noise_sigma / 128) z`` with ``z`` a standardized Rayleigh variate,
so the noise standard deviation is ``noise_sigma`` at intensity 128.
Random numbers come from numpy's PCG64 generator seeded with ``seed``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .active import CAP_FRACTION, SegmentModel, arc_lengths, partition_polyline
from .errors import ConfigError, IngestionError
from .imaging import EchoSequence, Frame, Landmarks, write_frames, write_landmarks
from .motion import (DEFAULT_PAIRING, DEFAULT_THRESHOLD, build_displacement_curves,
                     classify_segments, min_pair_interval)

TRUTH_FILENAME = "truth.json"
_RAYLEIGH_MEAN = np.sqrt(np.pi / 2.0)
_RAYLEIGH_STD = np.sqrt((4.0 - np.pi) / 2.0)


@dataclass(frozen=True)
class PhantomConfig:
    width: int = 636
    height: int = 422
    frames: int = 23
    fps: float = 25.0
    wall_brightness: int = 200
    cavity_brightness: int = 30
    background_brightness: int = 70
    noise_sigma: float = 0.0
    contraction_amplitude: float = 0.3
    per_segment_motion_scale: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    seed: int = 0
    wall_thickness: float = 8.0
    apex_frac: float = 0.15
    base_frac: float = 0.85
    half_width_frac: float = 0.13
    bulge: float = 0.5
    right_wall_brightness: Optional[int] = None
    right_background_brightness: Optional[int] = None

    def __post_init__(self):
        scales = tuple(float(v) for v in self.per_segment_motion_scale)
        object.__setattr__(self, "per_segment_motion_scale", scales)
        if len(scales) != 6 or not all(0.0 <= v <= 1.0 for v in scales):
            raise ConfigError("per_segment_motion_scale needs 6 values in [0, 1]")
        if self.width < 64 or self.height < 64:
            raise ConfigError(f"phantom must be at least 64x64, got {self.width}x{self.height}")
        if self.frames < 2:
            raise ConfigError("a phantom needs at least 2 frames")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        levels = [self.wall_brightness, self.cavity_brightness, self.background_brightness,
                  self.right_wall_brightness, self.right_background_brightness]
        if any(v is not None and not 0 <= v <= 255 for v in levels):
            raise ConfigError("brightness values must lie in [0, 255]")
        if not self.wall_brightness > self.cavity_brightness:
            raise ConfigError("wall_brightness must exceed cavity_brightness")
        rw = self.right_wall_brightness
        if rw is not None and rw < self.cavity_brightness:
            raise ConfigError("right_wall_brightness must not be below cavity_brightness")
        if not 0.0 <= self.contraction_amplitude < 1.0:
            raise ConfigError("contraction_amplitude must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0.0 < self.apex_frac < self.base_frac < 1.0:
            raise ConfigError("need 0 < apex_frac < base_frac < 1")
        if not 0.0 <= self.bulge <= 1.0:
            raise ConfigError("bulge must lie in [0, 1]")
        if not self.wall_thickness >= 1:
            raise ConfigError("wall_thickness must be >= 1")
        g = self.geometry()
        if g.cx - g.half_width - self.wall_thickness < 0 or g.apex_y - self.wall_thickness < 0 \
                or g.base_y + self.wall_thickness > self.height - 1:
            raise ConfigError("LV wall does not fit inside the frame")
        # the walls must stay apart at peak contraction below the cap
        ys = np.linspace(g.apex_y + 0.1 * g.length, g.base_y, 64)
        peak = g.half_widths(ys, 1.0, self.contraction_amplitude, self.per_segment_motion_scale,
                             self.segment_knots())
        if min(peak[0].min(), peak[1].min()) < 2.0:
            raise ConfigError("walls collapse onto each other at peak contraction")

    @classmethod
    def from_dict(cls, data) -> "PhantomConfig":
        if not isinstance(data, dict):
            raise ConfigError("phantom config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown phantom config keys {unknown}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_segment_motion_scale"] = list(self.per_segment_motion_scale)
        return d

    def with_(self, **kw) -> "PhantomConfig":
        return replace(self, **kw)

    def scaled(self, factor) -> "PhantomConfig":
        """Same phantom with every length multiplied by ``factor``."""
        return replace(self, width=int(round(self.width * factor)),
                       height=int(round(self.height * factor)),
                       wall_thickness=self.wall_thickness * factor)

    def geometry(self) -> "ArchGeometry":
        return ArchGeometry(cx=self.width / 2.0, apex_y=self.apex_frac * self.height,
                            base_y=self.base_frac * self.height,
                            half_width=self.half_width_frac * self.width, bulge=self.bulge)

    def segment_knots(self) -> tuple:
        """``y`` of the 3|4, 2|3 and 1|2 boundaries on the end-diastolic wall."""
        return self.geometry().segment_knots()


@dataclass(frozen=True)
class ArchGeometry:
    cx: float
    apex_y: float
    base_y: float
    half_width: float
    bulge: float

    @property
    def length(self) -> float:
        return self.base_y - self.apex_y

    def rest_half_width(self, y):
        s = (np.asarray(y, dtype=float) - self.apex_y) / self.length
        return self.half_width * ((1.0 + self.bulge) * s - self.bulge * s * s)

    def rest_walls(self, n=None) -> tuple:
        """End-diastolic ``(left, right)`` walls, base to apex and apex to base."""
        return _walls(self, self.rest_half_width, self.rest_half_width, n)

    def segment_knots(self) -> tuple:
        model = _partition(*self.rest_walls())
        # last vertices of segments 3, 2 and 1 on the left wall
        return tuple(float(model[k][-1][1]) for k in (3, 2, 1))

    def motion_profile(self, y, scales3, knots):
        """Blend of the three side scales (apical, mid, basal) along ``y``."""
        y34, y23, y12 = knots
        w = 0.1 * (y12 - y23)
        m_apical, m_mid, m_basal = scales3
        xp = [self.apex_y, y23 - w, y23 + w, y12 - w, y12 + w, self.base_y]
        fp = [m_apical, m_apical, m_mid, m_mid, m_basal, m_basal]
        return np.interp(y, xp, fp)

    def half_widths(self, y, c, amplitude, scales, knots):
        """Left and right half-widths at contraction level ``c``."""
        s1, s2, s3, s5, s6, s7 = scales
        h = self.rest_half_width(y)
        left = h * (1.0 - amplitude * c * self.motion_profile(y, (s3, s2, s1), knots))
        right = h * (1.0 - amplitude * c * self.motion_profile(y, (s5, s6, s7), knots))
        return left, right


def _walls(geom, left_fn, right_fn, n=None):
    n = n or max(64, int(np.ceil(geom.length)) + 1)
    ys = np.linspace(geom.base_y, geom.apex_y, n)
    left = np.column_stack([geom.cx - left_fn(ys), ys])
    ys_r = ys[::-1]
    right = np.column_stack([geom.cx + right_fn(ys_r), ys_r])
    return left, right


def _partition(left, right, frame_index=0) -> SegmentModel:
    return partition_polyline(np.vstack([left, right[1:]]), float(arc_lengths(left)[-1]),
                              CAP_FRACTION, frame_index)


def contraction(t, frames) -> float:
    """Raised cosine: 0 at frame 0 and the last frame, 1 at ``frames // 2``."""
    peak = frames // 2
    last = frames - 1
    if t <= peak:
        return 0.5 * (1.0 - np.cos(np.pi * t / peak)) if peak > 0 else 1.0
    return 0.5 * (1.0 + np.cos(np.pi * (t - peak) / (last - peak)))


@dataclass(frozen=True, eq=False)
class PhantomTruth:
    centerlines: tuple
    areas: np.ndarray
    segment_labels: dict
    landmarks: Landmarks
    true_lvef: float
    ratios: dict = field(default_factory=dict)

    def boundary(self, t) -> np.ndarray:
        left, right = self.centerlines[t]
        return np.vstack([left, right[1:]])

    def segment_models(self) -> list:
        return [_partition(left, right, t) for t, (left, right) in enumerate(self.centerlines)]

    def to_json(self) -> dict:
        return {
            "true_lvef": self.true_lvef,
            "segment_labels": {str(k): v for k, v in sorted(self.segment_labels.items())},
            "areas": [float(a) for a in self.areas],
            "centerlines": {
                "left": [np.round(l, 4).tolist() for l, _ in self.centerlines],
                "right": [np.round(r, 4).tolist() for _, r in self.centerlines],
            },
            "ratios": {str(k): v for k, v in sorted(self.ratios.items())},
            "landmarks": self.landmarks.to_json(None),
        }


def _analytic_area(geom, left_fn, right_fn, n=4001) -> float:
    ys = np.linspace(geom.apex_y, geom.base_y, n)
    widths = left_fn(ys) + right_fn(ys)
    return float(np.trapezoid(widths, ys))


def truth_for(config: PhantomConfig) -> PhantomTruth:
    """Analytic ground truth of ``config`` (no rasterization involved)."""
    geom = config.geometry()
    knots = config.segment_knots()
    centerlines, areas = [], []
    for t in range(config.frames):
        c = contraction(t, config.frames)

        def left_fn(y, c=c):
            return geom.half_widths(y, c, config.contraction_amplitude,
                                    config.per_segment_motion_scale, knots)[0]

        def right_fn(y, c=c):
            return geom.half_widths(y, c, config.contraction_amplitude,
                                    config.per_segment_motion_scale, knots)[1]

        centerlines.append(_walls(geom, left_fn, right_fn))
        areas.append(_analytic_area(geom, left_fn, right_fn))
    areas = np.array(areas)
    models = [_partition(left, right, t) for t, (left, right) in enumerate(centerlines)]
    verdicts = classify_segments(build_displacement_curves(models), min_pair_interval(models),
                                 DEFAULT_PAIRING, DEFAULT_THRESHOLD)
    landmarks = Landmarks(start=(int(round(geom.cx - geom.half_width)), int(round(geom.base_y))),
                          end=(int(round(geom.cx + geom.half_width)), int(round(geom.base_y))),
                          apex_seed=(int(round(geom.cx)), int(round(geom.apex_y))))
    return PhantomTruth(
        centerlines=tuple(centerlines),
        areas=areas,
        segment_labels={v.segment_id: v.label for v in verdicts},
        landmarks=landmarks,
        true_lvef=float(1.0 - areas.min() / areas.max()),
        ratios={v.segment_id: v.ratio for v in verdicts},
    )


def cavity_mask(config: PhantomConfig, t) -> np.ndarray:
    """Pixels whose centres lie strictly inside the frame-``t`` cavity."""
    geom = config.geometry()
    knots = config.segment_knots()
    h, w = config.height, config.width
    ys = np.arange(h, dtype=float)
    left, right = geom.half_widths(ys, contraction(t, config.frames), config.contraction_amplitude,
                                   config.per_segment_motion_scale, knots)
    inside_rows = (ys >= geom.apex_y) & (ys <= geom.base_y)
    dx = np.arange(w, dtype=float)[None, :] - geom.cx
    mask = np.where(dx < 0, -dx < left[:, None], dx < right[:, None])
    return mask & inside_rows[:, None]


def render_frame(config: PhantomConfig, t, rng=None) -> Frame:
    mask = cavity_mask(config, t)
    dist = ndimage.distance_transform_edt(~mask)
    geom = config.geometry()
    right_side = (np.arange(config.width) >= geom.cx)[None, :]
    wall = np.where(right_side, config.right_wall_brightness or config.wall_brightness,
                    config.wall_brightness).astype(float)
    rb = config.right_background_brightness
    bg = np.where(right_side, config.background_brightness if rb is None else rb,
                  config.background_brightness).astype(float)
    fade = np.clip(1.0 - (dist - 1.0) / config.wall_thickness, 0.0, 1.0)
    img = bg + (wall - bg) * fade
    img[mask] = config.cavity_brightness
    if config.noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        z = (rng.rayleigh(1.0, img.shape) - _RAYLEIGH_MEAN) / _RAYLEIGH_STD
        img = img * (1.0 + (config.noise_sigma / 128.0) * z)
    return Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def generate_phantom(config: PhantomConfig = PhantomConfig(), id=None):
    """Render ``config`` into an :class:`EchoSequence` plus its analytic truth."""
    truth = truth_for(config)
    rng = np.random.default_rng(config.seed)
    frames = tuple(render_frame(config, t, rng) for t in range(config.frames))
    seq = EchoSequence(frames=frames, fps=config.fps, landmarks=truth.landmarks,
                       id=id if id is not None else f"phantom_{config.seed}")
    return seq, truth


def write_sequence(seq: EchoSequence, truth: PhantomTruth, out_dir, suffix=".png") -> list:
    """Write frames, ``landmarks.json`` and ``truth.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IngestionError(f"{out_dir}: cannot create directory ({exc})", out_dir) from exc
    paths = write_frames(seq.frames, out_dir, suffix)
    paths.append(write_landmarks(seq.landmarks, seq.fps, out_dir / "landmarks.json"))
    truth_path = out_dir / TRUTH_FILENAME
    data = truth.to_json()
    data["landmarks"] = seq.landmarks.to_json(seq.fps)
    try:
        with open(truth_path, "w") as fh:
            json.dump(data, fh)
    except OSError as exc:
        raise IngestionError(f"{truth_path}: cannot write truth ({exc})", truth_path) from exc
    paths.append(truth_path)
    return paths


def read_truth(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"{path}: cannot read truth ({exc})", path) from exc


BATTERY_COUNTS = (("healthy", 10), ("frozen", 10), ("weak", 5), ("high", 5))
_AMPLITUDES = {"healthy": (0.35, 0.45), "frozen": (0.35, 0.45), "weak": (0.05, 0.10),
               "high": (0.60, 0.70)}
_FROZEN_CYCLE = (1, 2, 3, 5, 6, 7)


@dataclass(frozen=True)
class BatteryCase:
    id: str
    kind: str
    config: PhantomConfig
    frozen_segment: Optional[int] = None


def battery(noise_sigma=0.0, seed=0, frames=12, counts=BATTERY_COUNTS) -> list:
    """Seeded list of :class:`BatteryCase` covering the four phantom kinds.

    ``healthy`` and ``frozen`` phantoms contract moderately, ``frozen`` ones
    with one non-moving segment (cycling over the six analyzed segments),
    ``weak`` ones barely contract and ``high`` ones contract strongly.
    Each case gets its own noise seed.
    """
    rng = np.random.default_rng(seed)
    cases = []
    n = 0
    for kind, count in counts:
        if kind not in _AMPLITUDES:
            raise ConfigError(f"unknown phantom kind {kind!r}")
        lo, hi = _AMPLITUDES[kind]
        for k in range(count):
            scales = [1.0] * 6
            frozen = None
            if kind == "frozen":
                frozen = _FROZEN_CYCLE[k % len(_FROZEN_CYCLE)]
                scales[_FROZEN_CYCLE.index(frozen)] = 0.0
            cfg = PhantomConfig(frames=frames, noise_sigma=noise_sigma,
                                contraction_amplitude=float(rng.uniform(lo, hi)),
                                per_segment_motion_scale=tuple(scales),
                                seed=int(seed * 1000 + n))
            cases.append(BatteryCase(f"{kind}_{k:02d}", kind, cfg, frozen))
            n += 1
    return cases
