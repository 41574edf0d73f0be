"""Small argument checks shared by the stage modules and estimators."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import ValidationError


def check_points(points, name="points", min_count=0) -> np.ndarray:
    """Return ``points`` as a finite float ``(k, 2)`` array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"{name} must have shape (k, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    if len(arr) < min_count:
        raise ValidationError(f"{name} needs at least {min_count} points, got {len(arr)}")
    return arr


def check_point(p, name="point") -> tuple:
    return tuple(check_points(p, name, 1)[0])


def check_fraction(value, name, open_low=True, open_high=True) -> float:
    """``value`` as a float strictly (or not) inside (0, 1)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    v = float(value)
    lo_ok = v > 0 if open_low else v >= 0
    hi_ok = v < 1 if open_high else v <= 1
    if not (lo_ok and hi_ok and np.isfinite(v)):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValidationError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return v


def check_positive(value, name, allow_zero=False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    v = float(value)
    if not np.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValidationError(f"{name} must be {bound}, got {value}")
    return v


def check_count(value, name, minimum=1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_choice(value, name, choices):
    if value not in choices:
        raise ValidationError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value
