"""Region-based (Chan-Vese) active contour evolved as a level set.

Sign convention: the contour is the zero level set of ``phi``; the inside
region is ``phi > 0`` and the outside region ``phi < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage
from skimage import draw, measure

from . import _kernels
from .errors import DivergenceError, GeometryError, ValidationError
from .imaging import Frame

DEFAULT_MU = 0.2 * 255.0 ** 2


def heaviside(z, eps=1.0):
    """Smoothed Heaviside ``0.5 * (1 + (2/pi) * arctan(z / eps))``."""
    return 0.5 * (1.0 + (2.0 / np.pi) * np.arctan(np.asarray(z, dtype=float) / eps))


def dirac(z, eps=1.0):
    """Derivative of :func:`heaviside`."""
    z = np.asarray(z, dtype=float)
    return eps / (np.pi * (eps ** 2 + z ** 2))


@dataclass(frozen=True, eq=False)
class LevelSetField:
    phi: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.float64, copy=True)
        if phi.ndim != 2:
            raise ValidationError("level-set field must be 2-D")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def shape(self):
        return self.phi.shape

    def inside(self) -> np.ndarray:
        return self.phi > 0

    def has_both_signs(self) -> bool:
        return bool((self.phi > 0).any() and (self.phi < 0).any())

    def __neg__(self):
        return LevelSetField(-self.phi, self.iteration)


@dataclass(frozen=True)
class ChanVeseParams:
    """Weights of the length, area and region-fidelity terms plus solver settings.

    ``dt`` is dimensionless: each step is divided by the squared contrast
    ``(c1 - c2)^2`` of the current region means, so the front speed does
    not depend on the image's intensity range.

    ``iterations`` is an upper bound.  With ``converge_window > 0`` the run
    stops early once the inside region differs by at most
    ``converge_pixels`` pixels from its state ``converge_window`` steps
    before.
    """

    mu: float = DEFAULT_MU
    nu: float = 0.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    dt: float = 4.0
    epsilon: float = 1.0
    iterations: int = 300
    reinit_every: int = 3
    converge_window: int = 0
    converge_pixels: int = 2

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValidationError("lambda1 and lambda2 must be > 0")
        if not (self.mu >= 0 and self.nu >= 0):
            raise ValidationError("mu and nu must be >= 0")
        if not (self.dt > 0 and self.epsilon > 0):
            raise ValidationError("dt and epsilon must be > 0")
        if int(self.iterations) < 1:
            raise ValidationError("iterations must be >= 1")
        if int(self.reinit_every) < 0:
            raise ValidationError("reinit_every must be >= 0")
        if int(self.converge_window) < 0 or int(self.converge_pixels) < 0:
            raise ValidationError("converge_window and converge_pixels must be >= 0")

    def with_(self, **kw) -> "ChanVeseParams":
        return replace(self, **kw)


def _dims(frame_dims):
    if isinstance(frame_dims, Frame):
        return frame_dims.shape
    h, w = frame_dims
    return int(h), int(w)


def _segments_intersect(p, q):
    """Pairwise proper intersection test between the edges of polygons."""
    a, b = p[:, None, 0], p[:, None, 1]
    c, d = q[None, :, 0], q[None, :, 1]

    def orient(o, s, t):
        return np.sign((s[..., 0] - o[..., 0]) * (t[..., 1] - o[..., 1])
                       - (s[..., 1] - o[..., 1]) * (t[..., 0] - o[..., 0]))

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def is_simple_polygon(vertices) -> bool:
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    edges = np.stack([v, np.roll(v, -1, axis=0)], axis=1)
    hits = _segments_intersect(edges, edges)
    idx = np.arange(n)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (
        np.abs(idx[:, None] - idx[None, :]) == n - 1)
    return not np.any(hits & ~adjacent)


def signed_distance(vertices, frame_dims) -> np.ndarray:
    """Exact signed distance to a closed polygon, positive inside."""
    h, w = _dims(frame_dims)
    v = np.asarray(vertices, dtype=float)
    dist = _kernels.polyline_distance(np.arange(w, dtype=float), np.arange(h, dtype=float),
                                      np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]))
    yy, xx = np.mgrid[0:h, 0:w]
    inside = measure.points_in_poly(np.column_stack([xx.ravel(), yy.ravel()]), v).reshape(h, w)
    return np.where(inside, dist, -dist)


def initialize_levelset(contour, frame_dims) -> LevelSetField:
    """Signed distance field of a closed polyline (x, y vertices), positive inside.

    The polygon is rasterized and converted with the Euclidean distance
    transform, so values are accurate to about half a pixel; use
    :func:`signed_distance` for the exact field.
    """
    v = np.asarray(contour, dtype=float).reshape(-1, 2)
    if len(v) > 1 and np.allclose(v[0], v[-1]):
        v = v[:-1]
    if len(v) < 3:
        raise GeometryError("an initial contour needs at least 3 vertices")
    h, w = _dims(frame_dims)
    if v[:, 0].min() < 0 or v[:, 1].min() < 0 or v[:, 0].max() > w - 1 or v[:, 1].max() > h - 1:
        raise GeometryError("initial contour leaves the frame")
    if not is_simple_polygon(v):
        raise GeometryError("initial contour self-intersects")
    mask = draw.polygon2mask((h, w), v[:, ::-1])
    if not mask.any():
        raise GeometryError("initial contour encloses no pixel centre")
    return LevelSetField(redistance(np.where(mask, 1.0, -1.0)))


def region_means(field: LevelSetField, frame, epsilon=1.0):
    """Heaviside-weighted means ``(c1, c2)`` of the inside and outside regions.

    When either sharp region is empty both means are the global mean.
    """
    u = _as_image(frame)
    return _kernels.region_means(np.ascontiguousarray(field.phi), u, float(epsilon))


def _as_image(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.as_float()
    return np.ascontiguousarray(np.asarray(frame, dtype=np.float64))


def gradient_magnitude(phi) -> np.ndarray:
    gy, gx = np.gradient(np.pad(phi, 1, mode="edge"))
    return np.hypot(gx, gy)[1:-1, 1:-1]


def energy_terms(field: LevelSetField, frame, params: ChanVeseParams) -> dict:
    """The four terms of the smoothed Chan-Vese functional."""
    u = _as_image(frame)
    phi = field.phi
    eps = params.epsilon
    H = heaviside(phi, eps)
    c1, c2 = region_means(field, u, eps)
    return {
        "length": params.mu * float(np.sum(dirac(phi, eps) * gradient_magnitude(phi))),
        "area": params.nu * float(np.sum(H)),
        "inside": params.lambda1 * float(np.sum((u - c1) ** 2 * H)),
        "outside": params.lambda2 * float(np.sum((u - c2) ** 2 * (1.0 - H))),
    }


def total_energy(field: LevelSetField, frame, params: ChanVeseParams) -> float:
    return float(sum(energy_terms(field, frame, params).values()))


def redistance(phi) -> np.ndarray:
    """Reset ``phi`` to a signed distance while keeping its zero crossing.

    Cells adjacent to a sign change keep their first-order distance
    ``phi / |grad phi|``; everything else takes the exact Euclidean
    distance to the nearest cell of opposite sign, less half a pixel.
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    inside = phi > 0
    if inside.all() or not inside.any():
        return phi.copy()
    return _kernels.redistance(phi)


# pixels farther than this from the front cannot change sign between
# redistancing steps, so they are frozen during the update
NARROW_BAND = 6.0


def _curve_energy(phi, u, params):
    return total_energy(LevelSetField(redistance(phi)), u, params)


def evolve(field: LevelSetField, frame, params: ChanVeseParams = ChanVeseParams(),
           energy_log=None, log_every=25) -> LevelSetField:
    """Evolve ``field`` for ``params.iterations`` steps on ``frame``.

    If ``energy_log`` is a list, ``(iteration, energy)`` pairs are appended
    to it every ``log_every`` steps (and at both ends of the run).  The
    logged value is the energy of the current curve in its signed-distance
    representation, so it does not jump when the field is redistanced.

    ``log_every`` is rounded up to a multiple of ``reinit_every`` so that
    every checkpoint sits at the same phase of the redistancing cycle.

    With ``reinit_every > 0`` the field is redistanced before the first
    step and after every ``reinit_every`` steps, and only a narrow band
    around the front is updated in between.
    """
    u = _as_image(frame)
    if u.shape != field.shape:
        raise ValidationError(f"field shape {field.shape} does not match frame {u.shape}")
    phi = np.array(field.phi, dtype=np.float64, copy=True)
    total = int(params.iterations)
    reinit = int(params.reinit_every)
    if reinit:
        log_every = -(-int(log_every) // reinit) * reinit
    window = int(params.converge_window)
    if window and reinit:
        window = -(-window // reinit) * reinit
    stops = set()
    if reinit:
        stops.update(range(reinit, total, reinit))
    if window:
        stops.update(range(window, total, window))
    if energy_log is not None:
        stops.update(range(log_every, total, log_every))
    stops.add(total)
    band = NARROW_BAND if reinit else np.inf
    if reinit:
        phi = redistance(phi)
    if energy_log is not None:
        energy_log.append((field.iteration, _curve_energy(phi, u, params)))
    previous = phi > 0
    done = 0
    for stop in sorted(stops):
        n = stop - done
        bad, _ = _kernels.cv_steps(phi, u, n, float(params.mu), float(params.nu),
                                   float(params.lambda1), float(params.lambda2),
                                   float(params.dt), float(params.epsilon), 1e-8, band)
        if bad >= 0:
            raise DivergenceError(field.iteration + done + bad + 1)
        done = stop
        if reinit and done % reinit == 0 and done < total:
            phi = redistance(phi)
        converged = False
        if window and done % window == 0:
            current = phi > 0
            converged = int(np.count_nonzero(current != previous)) <= params.converge_pixels
            previous = current
        if energy_log is not None and (done % log_every == 0 or done == total or converged):
            energy_log.append((field.iteration + done, _curve_energy(phi, u, params)))
        if converged:
            break
    return LevelSetField(phi, field.iteration + done)


def _bilinear(phi, x, y):
    h, w = phi.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    return float(ndimage.map_coordinates(phi, [[y], [x]], order=1, mode="nearest")[0])


def _polygon_area(xy) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def extract_contour(field: LevelSetField) -> np.ndarray:
    """Largest zero-crossing polyline as ``(k, 2)`` ``(x, y)`` vertices.

    The polyline is oriented with the positive region on its left as seen
    on screen (counter-clockwise around a positive blob).  Closed contours
    repeat their first vertex at the end.
    """
    if not field.has_both_signs():
        raise GeometryError("level set has no zero crossing")
    contours = measure.find_contours(field.phi, 0.0)
    if not contours:
        raise GeometryError("level set has no zero crossing")
    polys = [c[:, ::-1] for c in contours if len(c) >= 2]
    best = max(polys, key=lambda p: (abs(_polygon_area(p)), len(p)))
    seg = np.diff(best, axis=0)
    k = int(np.argmax(np.hypot(seg[:, 0], seg[:, 1])))
    mid = 0.5 * (best[k] + best[k + 1])
    dx, dy = seg[k] / max(np.hypot(*seg[k]), 1e-12)
    probe = _bilinear(field.phi, mid[0] + 0.25 * dy, mid[1] - 0.25 * dx)
    if probe < 0:
        best = best[::-1]
    return np.ascontiguousarray(best)
