"""Frames, landmark annotations and echo sequences, plus disk I/O.

Coordinates are ``(x, y)`` pixel pairs with the origin at the top-left
corner, ``x`` growing to the right and ``y`` growing downward.  Pixel
arrays are indexed ``[y, x]``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import IngestionError, ValidationError

FRAME_SUFFIXES = (".png", ".pgm")
LANDMARKS_FILENAME = "landmarks.json"


@dataclass(frozen=True, eq=False)
class Frame:
    """Immutable 8-bit grayscale raster."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValidationError(f"frame must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.number) or not np.all(np.isfinite(arr)):
                raise ValidationError("frame intensities must be finite numbers")
            if arr.min() < 0 or arr.max() > 255:
                raise ValidationError("frame intensities must lie in [0, 255]")
            arr = np.rint(arr).astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


def _as_point(p, name):
    try:
        x, y = p
        x, y = int(x), int(y)
    except (TypeError, ValueError):
        raise ValidationError(f"landmark {name!r} must be an (x, y) integer pair, got {p!r}")
    return (x, y)


@dataclass(frozen=True)
class Landmarks:
    """Mitral-annulus start/end points and an apex seed, in pixels."""

    start: tuple
    end: tuple
    apex_seed: tuple

    def __post_init__(self):
        for name in ("start", "end", "apex_seed"):
            object.__setattr__(self, name, _as_point(getattr(self, name), name))
        if not self.start[0] < self.end[0]:
            raise ValidationError(
                f"start.x ({self.start[0]}) must be left of end.x ({self.end[0]})")
        if not self.apex_seed[1] < min(self.start[1], self.end[1]):
            raise ValidationError("apex_seed must lie above both start and end points")

    def check_bounds(self, width, height):
        for name in ("start", "end", "apex_seed"):
            x, y = getattr(self, name)
            if not (0 <= x < width and 0 <= y < height):
                raise ValidationError(
                    f"landmark {name} {(x, y)} lies outside the {width}x{height} frame")
        return self

    def translated(self, dx, dy):
        return Landmarks(
            start=(self.start[0] + dx, self.start[1] + dy),
            end=(self.end[0] + dx, self.end[1] + dy),
            apex_seed=(self.apex_seed[0] + dx, self.apex_seed[1] + dy),
        )

    @property
    def base_y(self):
        return max(self.start[1], self.end[1])

    def to_json(self, fps):
        return {"fps": fps, "start": list(self.start), "end": list(self.end),
                "apex_seed": list(self.apex_seed)}


@dataclass(frozen=True, eq=False)
class EchoSequence:
    """One cardiac cycle of frames; frame 0 is end-diastole."""

    frames: tuple
    fps: float
    landmarks: Landmarks
    id: str = "echo"

    def __post_init__(self):
        frames = tuple(f if isinstance(f, Frame) else Frame(f) for f in self.frames)
        if len(frames) < 2:
            raise ValidationError("an echo sequence needs at least 2 frames")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if f.shape != shape:
                raise ValidationError(f"frame {i} has shape {f.shape}, expected {shape}")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise ValidationError(f"fps must be positive, got {self.fps}")
        self.landmarks.check_bounds(shape[1], shape[0])
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def width(self):
        return self.frames[0].width

    @property
    def height(self):
        return self.frames[0].height

    def __eq__(self, other):
        if not isinstance(other, EchoSequence):
            return NotImplemented
        return (self.frames == other.frames and self.fps == other.fps
                and self.landmarks == other.landmarks and self.id == other.id)

    __hash__ = None


def smooth(frame: Frame, sigma: float) -> Frame:
    """Gaussian blur of ``frame``; ``sigma == 0`` returns the frame unchanged."""
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return frame
    out = ndimage.gaussian_filter(frame.as_float(), sigma=sigma, mode="nearest")
    return Frame(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def read_frame(path) -> Frame:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "L":
                raise IngestionError(
                    f"{path}: expected 8-bit single-channel image, got mode {im.mode}", path)
            return Frame(np.asarray(im, dtype=np.uint8))
    except IngestionError:
        raise
    except (OSError, ValueError, SyntaxError) as exc:
        raise IngestionError(f"{path}: cannot decode image ({exc})", path) from exc


def write_frame(frame: Frame, path) -> Path:
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    try:
        Image.fromarray(np.ascontiguousarray(frame.pixels), mode="L").save(path, format=fmt)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot write frame ({exc})", path) from exc
    return path


def read_landmarks(path):
    """Parse a landmarks/metadata JSON file; returns ``(Landmarks, fps)``."""
    path = Path(path)
    try:
        with open(path) as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read landmarks ({exc})", path) from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: malformed JSON ({exc})", path) from exc
    if not isinstance(meta, dict):
        raise ValidationError(f"{path}: landmarks file must hold a JSON object")
    missing = [k for k in ("fps", "start", "end", "apex_seed") if k not in meta]
    if missing:
        raise ValidationError(f"{path}: missing keys {missing}")
    fps = meta["fps"]
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or not fps > 0:
        raise ValidationError(f"{path}: fps must be a positive number")
    return Landmarks(start=meta["start"], end=meta["end"], apex_seed=meta["apex_seed"]), float(fps)


def list_frame_files(frame_dir) -> list:
    frame_dir = Path(frame_dir)
    if not frame_dir.is_dir():
        raise IngestionError(f"{frame_dir}: not a directory", frame_dir)
    return sorted(p for p in frame_dir.iterdir()
                  if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES)


def load_sequence(frame_dir, landmarks_file=None, id=None) -> EchoSequence:
    """Load every PNG/PGM frame of ``frame_dir`` in lexicographic name order.

    ``landmarks_file`` defaults to ``frame_dir/landmarks.json``.
    """
    frame_dir = Path(frame_dir)
    if landmarks_file is None:
        landmarks_file = frame_dir / LANDMARKS_FILENAME
    paths = list_frame_files(frame_dir)
    if len(paths) < 2:
        raise IngestionError(
            f"{frame_dir}: need at least 2 frame images, found {len(paths)}", frame_dir)
    frames = [read_frame(p) for p in paths]
    landmarks, fps = read_landmarks(landmarks_file)
    shape = frames[0].shape
    for p, f in zip(paths, frames):
        if f.shape != shape:
            raise IngestionError(f"{p}: shape {f.shape} differs from {shape}", p)
    landmarks.check_bounds(shape[1], shape[0])
    return EchoSequence(frames=tuple(frames), fps=fps, landmarks=landmarks,
                        id=id if id is not None else frame_dir.name)


def write_frames(frames: Sequence[Frame], out_dir, suffix=".png", prefix="frame_"):
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    width = max(3, len(str(len(frames) - 1)))
    return [write_frame(f, out_dir / f"{prefix}{i:0{width}d}{suffix}")
            for i, f in enumerate(frames)]


def write_landmarks(landmarks: Landmarks, fps, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w") as fh:
            json.dump(landmarks.to_json(fps), fh, indent=2)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot write landmarks ({exc})", path) from exc
    return path
