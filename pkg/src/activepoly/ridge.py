"""Ridge polynomials along the bright LV wall and the artificial barrier wall.

For each side of the chamber a guide line runs from the apex seed to the
basal landmark.  Anchors placed on it are stretched horizontally into a
search band (the RoI); the brightest pixel of each band row is a ridge
point, and a regularized quartic ``x = P(y)`` through those points is the
ridge polynomial (RP).  Painting a bright ramp just outside each RP gives
the level-set snake a wall it cannot cross.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ValidationError
from .imaging import Frame, Landmarks
from .polyfit import Polynomial, fit_curve
from .validation import check_count, check_fraction, check_points

ANCHOR_COUNT = 14
MIN_RIDGE_POINTS = 10
WALL_RAMP = (200, 255)


@dataclass(frozen=True)
class GuideLine:
    """Straight segment from ``p0`` (apex end) to ``p1`` (basal end)."""

    p0: tuple
    p1: tuple

    def __post_init__(self):
        p0 = tuple(float(v) for v in self.p0)
        p1 = tuple(float(v) for v in self.p1)
        if np.hypot(p1[0] - p0[0], p1[1] - p0[1]) == 0:
            raise GeometryError(f"guide line endpoints coincide at {p0}")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    @property
    def slope(self) -> float:
        """``dy/dx``; infinite for a vertical line."""
        dx = self.p1[0] - self.p0[0]
        dy = self.p1[1] - self.p0[1]
        return np.inf if dx == 0 else dy / dx

    def point_at(self, t):
        t = np.asarray(t, dtype=float)
        x = self.p0[0] + t * (self.p1[0] - self.p0[0])
        y = self.p0[1] + t * (self.p1[1] - self.p0[1])
        return np.stack([x, y], axis=-1)

    def x_at(self, y):
        """Abscissa at ordinate ``y`` (extrapolated linearly)."""
        (x0, y0), (x1, y1) = self.p0, self.p1
        if y1 == y0:
            raise GeometryError("horizontal guide line has no unique x for a given y")
        return x0 + (np.asarray(y, dtype=float) - y0) * (x1 - x0) / (y1 - y0)

    def contains(self, p, tol=1e-9) -> bool:
        (x0, y0), (x1, y1) = self.p0, self.p1
        cross = (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0)
        return abs(cross) <= tol * max(1.0, np.hypot(x1 - x0, y1 - y0))


def fit_guide_lines(landmarks: Landmarks):
    """Lines from the apex seed to the start (left) and end (right) points."""
    apex = landmarks.apex_seed
    return GuideLine(apex, landmarks.start), GuideLine(apex, landmarks.end)


@dataclass(frozen=True, eq=False)
class AnchorSet:
    left: np.ndarray
    right: np.ndarray
    apex: tuple

    def __post_init__(self):
        for side in ("left", "right"):
            pts = check_points(getattr(self, side), side)
            if len(pts) != ANCHOR_COUNT:
                raise ValidationError(f"{side} needs exactly {ANCHOR_COUNT} anchors, got {len(pts)}")
            dy = np.diff(pts[:, 1])
            if not (np.all(dy > 0) or np.all(dy < 0)):
                raise ValidationError(f"{side} anchors must be monotone in y")
            steps = np.hypot(*np.diff(pts, axis=0).T)
            if steps.max() - steps.min() > 0.5:
                raise ValidationError(f"{side} anchors are not equally spaced")
            pts = pts.copy()
            pts.setflags(write=False)
            object.__setattr__(self, side, pts)
        object.__setattr__(self, "apex", tuple(float(v) for v in self.apex))

    def side(self, name) -> np.ndarray:
        if name not in ("left", "right"):
            raise ValidationError(f"side must be 'left' or 'right', got {name!r}")
        return getattr(self, name)


def place_anchor_points(lines, count=ANCHOR_COUNT) -> AnchorSet:
    """``count`` equally spaced points per guide line, endpoints excluded."""
    count = check_count(count, "count")
    left, right = lines
    t = np.arange(1, count + 1) / (count + 1)
    return AnchorSet(left=left.point_at(t), right=right.point_at(t), apex=left.p0)


def stretch_point(anchor, midline_x, half_width, delta_frac, width=None):
    """Inner (toward ``midline_x``) and outer copies of ``anchor``.

    The horizontal shift is ``delta_frac * half_width``; the outer point is
    clamped to ``[0, width - 1]`` when ``width`` is given.
    """
    delta_frac = check_fraction(delta_frac, "delta_frac")
    x, y = float(anchor[0]), float(anchor[1])
    shift = delta_frac * abs(float(half_width))
    toward = 1.0 if midline_x >= x else -1.0
    inner = x + toward * shift
    outer = x - toward * shift
    if width is not None:
        inner = min(max(inner, 0.0), width - 1.0)
        outer = min(max(outer, 0.0), width - 1.0)
    return (inner, y), (outer, y)


def stretch_anchors(anchors: AnchorSet, delta_frac=0.6, width=None, lines=None) -> dict:
    """Per side ``(inner_pts, outer_pts)`` arrays at the anchors' rows.

    The local chamber half-width at an anchor is half the horizontal gap to
    the opposite guide line at the same ``y`` (the opposite anchor set when
    no lines are given).
    """
    delta_frac = check_fraction(delta_frac, "delta_frac")
    out = {}
    for side, other in (("left", "right"), ("right", "left")):
        pts = anchors.side(side)
        if lines is not None:
            other_line = lines[1] if side == "left" else lines[0]
            other_x = other_line.x_at(pts[:, 1])
        else:
            ref = anchors.side(other)
            order = np.argsort(ref[:, 1])
            other_x = np.interp(pts[:, 1], ref[order, 1], ref[order, 0])
        inner, outer = [], []
        for (x, y), ox in zip(pts, other_x):
            i, o = stretch_point((x, y), 0.5 * (x + ox), 0.5 * abs(ox - x), delta_frac, width)
            inner.append(i)
            outer.append(o)
        out[side] = (np.array(inner), np.array(outer))
    return out


@dataclass(frozen=True)
class RoI:
    """Search band between two curves ``x = P(y)``."""

    inner: Polynomial
    outer: Polynomial
    side: str
    y_range: tuple

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValidationError(f"side must be 'left' or 'right', got {self.side!r}")
        y0, y1 = sorted(float(v) for v in self.y_range)
        object.__setattr__(self, "y_range", (y0, y1))
        ys = np.linspace(y0, y1, max(2, int(np.ceil(y1 - y0)) + 1))
        lo, hi = self.bounds(ys)
        if np.any(hi <= lo):
            bad = float(ys[np.argmax(hi <= lo)])
            raise GeometryError(f"{self.side} RoI band is empty at y={bad:.1f}")

    def bounds(self, y):
        """``(lo, hi)`` abscissae of the band at ``y``."""
        a, b = self.outer(y), self.inner(y)
        return (a, b) if self.side == "left" else (b, a)


def build_roi(inner_pts, outer_pts, lam=0.1, side="left", y_range=None) -> RoI:
    inner_pts = check_points(inner_pts, "inner points", 5)
    outer_pts = check_points(outer_pts, "outer points", 5)
    if y_range is None:
        ys = np.concatenate([inner_pts[:, 1], outer_pts[:, 1]])
        y_range = (ys.min(), ys.max())
    return RoI(inner=fit_curve(inner_pts, 4, lam), outer=fit_curve(outer_pts, 4, lam),
               side=side, y_range=y_range)


def detect_ridge_points(frame: Frame, roi: RoI, anchors, min_contrast=0.0) -> np.ndarray:
    """Brightest pixel strictly inside the band on each anchor's row.

    Ties go to the pixel nearest the anchor (then the leftmost).  Rows whose
    band holds no pixel, or whose intensity range is below
    ``min_contrast``, contribute no point.  Returns a ``(k, 2)`` array.
    """
    anchors = check_points(anchors, "anchors")
    pix = frame.pixels
    h, w = pix.shape
    found = []
    for ax, ay in anchors:
        row = int(round(ay))
        if not 0 <= row < h:
            continue
        lo, hi = (float(v) for v in roi.bounds(float(row)))
        c0 = max(int(np.floor(lo)) + 1, 0)
        c1 = min(int(np.ceil(hi)) - 1, w - 1)
        if c1 < c0:
            continue
        vals = pix[row, c0:c1 + 1].astype(int)
        if vals.max() - vals.min() < min_contrast:
            continue
        cand = c0 + np.flatnonzero(vals == vals.max())
        best = cand[np.argmin(np.abs(cand - ax))]
        found.append((float(best), float(row)))
    return np.array(found, dtype=float).reshape(-1, 2)


def refine_apex(frame: Frame, seed, radius=12) -> tuple:
    """Topmost ridge point of the apical cap near ``seed``.

    Within a square window, each column's brightest pixel is a candidate
    ridge point; among candidates at least halfway between the window's
    minimum and maximum intensity the one with the smallest ``y`` wins
    (ties go to the column nearest the seed).  A flat window returns the
    seed unchanged.
    """
    pix = frame.pixels
    h, w = pix.shape
    sx, sy = int(round(seed[0])), int(round(seed[1]))
    x0, x1 = max(sx - radius, 0), min(sx + radius, w - 1)
    y0, y1 = max(sy - radius, 0), min(sy + radius, h - 1)
    win = pix[y0:y1 + 1, x0:x1 + 1].astype(int)
    lo, hi = win.min(), win.max()
    if hi == lo:
        return (sx, sy)
    rows = np.argmax(win, axis=0)
    peaks = win[rows, np.arange(win.shape[1])]
    ok = peaks >= lo + 0.5 * (hi - lo)
    cols = np.flatnonzero(ok)
    top = rows[cols].min()
    cols = cols[rows[cols] == top]
    best = cols[np.argmin(np.abs(cols + x0 - sx))]
    return (int(best + x0), int(top + y0))


@dataclass(frozen=True)
class RidgePolynomialPair:
    left: Polynomial
    right: Polynomial
    y_range: tuple

    # the top of the arch is excluded from the crossing check since both
    # curves converge on the apex there
    CAP_FRACTION = 0.1

    def __post_init__(self):
        for side in ("left", "right"):
            if getattr(self, side).order != 4:
                raise ValidationError(f"{side} ridge polynomial must have order 4")
        y0, y1 = sorted(float(v) for v in self.y_range)
        object.__setattr__(self, "y_range", (y0, y1))
        ys = np.linspace(y0 + self.CAP_FRACTION * (y1 - y0), y1, 64)
        if np.any(self.left(ys) >= self.right(ys)):
            raise GeometryError("left and right ridge polynomials cross")

    def rows(self) -> np.ndarray:
        y0, y1 = self.y_range
        return np.arange(int(np.ceil(y0)), int(np.floor(y1)) + 1)


def fit_ridge_polynomials(left_pts, right_pts, lam=0.1, apex=None, y_range=None,
                          min_points=MIN_RIDGE_POINTS) -> RidgePolynomialPair:
    """Quartic ``x = P(y)`` fits to the ridge points of each wall.

    When ``apex`` is given it is added to both point sets so that the two
    curves meet at the top of the arch.
    """
    sets = []
    for name, pts in (("left", left_pts), ("right", right_pts)):
        pts = check_points(pts, f"{name} ridge points")
        if len(pts) < min_points:
            raise ValidationError(
                f"{name} wall has {len(pts)} ridge points, need at least {min_points}")
        if apex is not None:
            pts = np.vstack([pts, np.asarray(apex, dtype=float).reshape(1, 2)])
        sets.append(pts)
    if y_range is None:
        ys = np.concatenate([s[:, 1] for s in sets])
        y_range = (ys.min(), ys.max())
    return RidgePolynomialPair(left=fit_curve(sets[0], 4, lam), right=fit_curve(sets[1], 4, lam),
                               y_range=y_range)


def wall_ramp(thickness=6, ramp=WALL_RAMP) -> np.ndarray:
    """Layer intensities from the ridge outward, rising from ``ramp[0]`` to ``ramp[1]``."""
    thickness = check_count(thickness, "thickness")
    lo, hi = ramp
    if not 0 <= lo <= hi <= 255:
        raise ValidationError(f"ramp must satisfy 0 <= lo <= hi <= 255, got {ramp}")
    if thickness == 1:
        return np.array([hi], dtype=np.uint8)
    return np.rint(np.linspace(lo, hi, thickness)).astype(np.uint8)


def wall_columns(rps: RidgePolynomialPair):
    """Integer rows of the RP range with the rounded left and right RP columns."""
    rows = rps.rows()
    xl = np.rint(rps.left(rows)).astype(int)
    xr = np.rint(rps.right(rows)).astype(int)
    return rows, xl, xr


def paint_wall(frame: Frame, rps: RidgePolynomialPair, thickness=6, ramp=WALL_RAMP) -> Frame:
    """Copy of ``frame`` with a bright ramp painted outward of each RP.

    On every row of the RP range, layer ``k`` (``k = 0`` on the curve) is
    painted ``k`` pixels left of the left RP and right of the right RP.
    """
    values = wall_ramp(thickness, ramp)
    out = frame.pixels.copy()
    h, w = out.shape
    rows, xl, xr = wall_columns(rps)
    k = np.arange(len(values))
    for row, a, b in zip(rows, xl, xr):
        if not 0 <= row < h:
            continue
        for cols in (a - k, b + k):
            ok = (cols >= 0) & (cols < w)
            out[row, cols[ok]] = values[ok]
    return Frame(out)
