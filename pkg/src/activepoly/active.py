"""Active polynomials fitted to the converged snake, wall segments and chamber area."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, GeometryError, ValidationError
from .polyfit import Polynomial, fit_curve
from .validation import check_fraction, check_point, check_points

SNAKE_POINTS = 9
SEGMENT_IDS = (1, 2, 3, 4, 5, 6, 7)
ANALYZED_SEGMENTS = (1, 2, 3, 5, 6, 7)
CAP_FRACTION = 1.0 / 7.0


# -- polyline helpers -------------------------------------------------------

def arc_lengths(poly) -> np.ndarray:
    """Cumulative arc length at each vertex, starting at 0."""
    poly = np.asarray(poly, dtype=float)
    steps = np.hypot(*np.diff(poly, axis=0).T) if len(poly) > 1 else np.zeros(0)
    return np.concatenate([[0.0], np.cumsum(steps)])


def polyline_length(poly) -> float:
    return float(arc_lengths(poly)[-1])


def point_at_arc(poly, s, cum=None) -> np.ndarray:
    """Points at arc positions ``s`` (clamped to the polyline)."""
    poly = np.asarray(poly, dtype=float)
    if cum is None:
        cum = arc_lengths(poly)
    s = np.clip(np.asarray(s, dtype=float), 0.0, cum[-1])
    x = np.interp(s, cum, poly[:, 0])
    y = np.interp(s, cum, poly[:, 1])
    return np.stack([x, y], axis=-1)


def resample(poly, n) -> np.ndarray:
    """``n`` points at equal arc-length spacing, both endpoints included."""
    poly = check_points(poly, "polyline", 1)
    cum = arc_lengths(poly)
    return point_at_arc(poly, np.linspace(0.0, cum[-1], n), cum)


def cut(poly, s0, s1, cum=None) -> np.ndarray:
    """Sub-polyline between arc positions ``s0 <= s1``."""
    poly = np.asarray(poly, dtype=float)
    if cum is None:
        cum = arc_lengths(poly)
    inner = (cum > s0) & (cum < s1)
    ends = point_at_arc(poly, [s0, s1], cum)
    return np.vstack([ends[:1], poly[inner], ends[1:]])


def _project(poly, p, cum):
    """Arc position of the point of ``poly`` nearest ``p`` and its distance."""
    a = poly[:-1]
    d = poly[1:] - a
    ll = np.einsum("ij,ij->i", d, d)
    t = np.where(ll > 0, np.einsum("ij,ij->i", np.asarray(p) - a, d) / np.where(ll > 0, ll, 1), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * d
    dist = np.hypot(*(q - p).T)
    k = int(np.argmin(dist))
    return cum[k] + t[k] * np.sqrt(ll[k]), float(dist[k])


# -- snake sampling ----------------------------------------------------------

def sample_snake_points(contour, start, apex, end, n=SNAKE_POINTS, tol=5.0):
    """Equal arc-length samples of the snake from start to apex and apex to end.

    ``contour`` is an open or closed ``(k, 2)`` polyline.  Each landmark is
    projected onto the contour; a landmark farther than ``tol`` pixels away
    raises :class:`AlignmentError`.  On a closed contour the arc joining two
    landmarks is the one that avoids the third.  Returns ``(left, right)``
    arrays of ``n`` points ordered start-to-apex and apex-to-end.
    """
    poly = check_points(contour, "contour", 2)
    closed = len(poly) > 2 and np.allclose(poly[0], poly[-1])
    if closed and not np.array_equal(poly[0], poly[-1]):
        poly = np.vstack([poly, poly[:1]])
    cum = arc_lengths(poly)
    total = cum[-1]
    if total <= 0:
        raise GeometryError("contour has zero length")
    pos = {}
    for name, p in (("start", start), ("apex", apex), ("end", end)):
        p = np.asarray(check_point(p, name))
        s, dist = _project(poly, p, cum)
        if dist > tol:
            raise AlignmentError(f"contour passes {dist:.1f} px from the {name} landmark (limit {tol})")
        pos[name] = s

    def arc(a, b, avoid):
        if not closed:
            return np.linspace(a, b, n)
        fwd = (b - a) % total
        if (avoid - a) % total < fwd:
            return (a - np.linspace(0.0, total - fwd, n)) % total
        return (a + np.linspace(0.0, fwd, n)) % total

    left = point_at_arc(poly, arc(pos["start"], pos["apex"], pos["end"]), cum)
    right = point_at_arc(poly, arc(pos["apex"], pos["end"], pos["start"]), cum)
    return left, right


# -- active polynomials ------------------------------------------------------

@dataclass(frozen=True)
class ActivePolynomialPair:
    left: Polynomial
    right: Polynomial
    apex: tuple
    start: tuple
    end: tuple

    def __post_init__(self):
        for name in ("apex", "start", "end"):
            object.__setattr__(self, name, tuple(float(v) for v in check_point(getattr(self, name), name)))
        for side in ("left", "right"):
            if getattr(self, side).order != 4:
                raise ValidationError(f"{side} active polynomial must have order 4")

    def check(self, tol=3.0) -> "ActivePolynomialPair":
        """Raise :class:`GeometryError` unless the curves meet the landmarks."""
        ay = self.apex[1]
        gap = abs(float(self.left(ay) - self.right(ay)))
        if gap > tol:
            raise GeometryError(f"active polynomials are {gap:.1f} px apart at the apex")
        miss = abs(float(self.left(self.start[1])) - self.start[0])
        if miss > tol:
            raise GeometryError(f"left active polynomial misses the start point by {miss:.1f} px")
        miss = abs(float(self.right(self.end[1])) - self.end[0])
        if miss > tol:
            raise GeometryError(f"right active polynomial misses the end point by {miss:.1f} px")
        y0 = ay + 0.5 * (min(self.start[1], self.end[1]) - ay)
        ys = np.linspace(y0, min(self.start[1], self.end[1]), 32)
        if np.any(self.left(ys) >= self.right(ys)):
            raise GeometryError("left and right active polynomials cross")
        return self

    def left_curve(self, step=0.25) -> np.ndarray:
        """Left curve sampled from the start point up to the apex row."""
        ys = _rows(self.start[1], self.apex[1], step)
        return np.column_stack([self.left(ys), ys])

    def right_curve(self, step=0.25) -> np.ndarray:
        """Right curve sampled from the apex row down to the end point."""
        ys = _rows(self.apex[1], self.end[1], step)
        return np.column_stack([self.right(ys), ys])

    def boundary(self, step=0.25) -> np.ndarray:
        """Open wall polyline start -> apex -> end."""
        return np.vstack([self.left_curve(step), self.right_curve(step)])


def _rows(y0, y1, step):
    n = max(2, int(np.ceil(abs(y1 - y0) / step)) + 1)
    return np.linspace(y0, y1, n)


def fit_active_polynomials(left_pts, right_pts, start, apex, end, lam=0.1,
                           tol=3.0, anchor_apex=True) -> ActivePolynomialPair:
    """Quartic ``x = P(y)`` fits to the left and right snake samples.

    With ``anchor_apex`` the apex landmark joins both point sets, so the two
    curves are pulled towards a common tip instead of extrapolating past the
    last snake sample.
    """
    left_pts = check_points(left_pts, "left snake points", 5)
    right_pts = check_points(right_pts, "right snake points", 5)
    if anchor_apex:
        tip = np.asarray(check_point(apex, "apex"), dtype=float)[None, :]
        left_pts = np.vstack([left_pts, tip])
        right_pts = np.vstack([tip, right_pts])
    pair = ActivePolynomialPair(left=fit_curve(left_pts, 4, lam), right=fit_curve(right_pts, 4, lam),
                                apex=apex, start=start, end=end)
    return pair.check(tol)


# -- segments ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SegmentModel:
    """Seven contiguous wall segments, 1-3 on the left wall, 4 the apical cap."""

    segments: tuple
    frame_index: int = 0

    def __post_init__(self):
        segs = tuple(check_points(s, f"segment {i + 1}", 2) for i, s in enumerate(self.segments))
        if len(segs) != 7:
            raise ValidationError(f"a segment model holds 7 segments, got {len(segs)}")
        for k in range(6):
            if not np.array_equal(segs[k][-1], segs[k + 1][0]):
                raise ValidationError(f"segments {k + 1} and {k + 2} are not contiguous")
        for s in segs:
            s.setflags(write=False)
        object.__setattr__(self, "segments", segs)

    def __getitem__(self, segment_id) -> np.ndarray:
        if segment_id not in SEGMENT_IDS:
            raise KeyError(segment_id)
        return self.segments[segment_id - 1]

    def lengths(self) -> dict:
        return {i: polyline_length(s) for i, s in zip(SEGMENT_IDS, self.segments)}

    def boundary(self) -> np.ndarray:
        return np.vstack([self.segments[0]] + [s[1:] for s in self.segments[1:]])

    def scaled(self, factor, origin=(0.0, 0.0)) -> "SegmentModel":
        o = np.asarray(origin, dtype=float)
        return SegmentModel(tuple(o + factor * (s - o) for s in self.segments), self.frame_index)

    def translated(self, dx, dy) -> "SegmentModel":
        d = np.array([dx, dy], dtype=float)
        return SegmentModel(tuple(s + d for s in self.segments), self.frame_index)


def partition_polyline(boundary, apex_s, cap_fraction=CAP_FRACTION, frame_index=0) -> SegmentModel:
    """Split an open start -> apex -> end polyline into the seven segments.

    ``apex_s`` is the arc position of the apex.  Segment 4 spans
    ``cap_fraction`` of the total length centred on it; each remaining side
    is cut into three equal arcs.
    """
    boundary = check_points(boundary, "boundary", 2)
    cap_fraction = check_fraction(cap_fraction, "cap_fraction")
    cum = arc_lengths(boundary)
    total = cum[-1]
    half = 0.5 * cap_fraction * total
    a, b = apex_s - half, apex_s + half
    if a <= 0 or b >= total:
        raise GeometryError("apical cap does not fit inside the wall")
    knots = np.concatenate([np.linspace(0.0, a, 4), np.linspace(b, total, 4)])
    segs = tuple(cut(boundary, knots[k], knots[k + 1], cum) for k in range(7))
    return SegmentModel(segs, frame_index)


def partition_segments(aps: ActivePolynomialPair, frame_index=0, cap_fraction=CAP_FRACTION,
                       step=0.25) -> SegmentModel:
    """Seven segments of the AP wall: 1-3 base to apex on the left, 5-7 on the right."""
    left = aps.left_curve(step)
    boundary = np.vstack([left, aps.right_curve(step)])
    return partition_polyline(boundary, polyline_length(left), cap_fraction, frame_index)


# -- area --------------------------------------------------------------------

def polygon_pixel_count(vertices) -> int:
    """Number of pixel centres inside a closed polygon.

    Scan-line rasterization with the half-open rule: an edge covers rows
    ``ceil(y0) <= r < ceil(y1)`` and a span covers columns
    ``ceil(xa) <= c < ceil(xb)``, so adjacent polygons never share pixels
    and integer translations preserve the count exactly.
    """
    v = check_points(vertices, "polygon", 3)
    a = v
    b = np.roll(v, -1, axis=0)
    lo = np.minimum(a[:, 1], b[:, 1])
    hi = np.maximum(a[:, 1], b[:, 1])
    r0 = np.ceil(lo).astype(np.int64)
    r1 = np.ceil(hi).astype(np.int64)
    n = np.maximum(r1 - r0, 0)
    if n.sum() == 0:
        return 0
    edge = np.repeat(np.arange(len(v)), n)
    rows = np.repeat(r0, n) + (np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n))
    ya, yb = a[edge, 1], b[edge, 1]
    xa, xb = a[edge, 0], b[edge, 0]
    xs = xa + (rows - ya) * (xb - xa) / (yb - ya)
    order = np.lexsort((xs, rows))
    rows, xs = rows[order], xs[order]
    left, right = xs[0::2], xs[1::2]
    return int(np.maximum(np.ceil(right) - np.ceil(left), 0).sum())


def chamber_polygon(aps: ActivePolynomialPair, step=0.25) -> np.ndarray:
    """Region bounded by both APs and the straight base from end back to start."""
    return aps.boundary(step)


def chamber_area(aps: ActivePolynomialPair, step=0.25) -> int:
    """Pixel count of the chamber enclosed by the APs and the base line."""
    return polygon_pixel_count(chamber_polygon(aps, step))
