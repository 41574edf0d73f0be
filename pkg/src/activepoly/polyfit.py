"""Ridge-regularized least-squares polynomial fitting.

Two independent solvers are provided for the same problem

    minimize ||b - A c||^2 + lam^2 ||c||^2

where ``A`` is the Vandermonde matrix of the sample abscissae:
:func:`fit_polynomial` solves the stacked system ``[A; lam I] c = [b; 0]``
by orthogonal least squares, :func:`fit_polynomial_svd` applies the
spectral filter ``s / (s^2 + lam^2)`` to the singular triplets of ``A``.
Both operate in the coordinates they are given.  :func:`fit_curve` is the
geometric entry point used by the wall models: it rescales the abscissae
to ``[-1, 1]``, centres the ordinates, solves, and maps the result back
to raw pixel coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import SingularSystemError, ValidationError


@dataclass(frozen=True)
class Polynomial:
    """``P(x) = sum(c_k x^k)``, coefficients in increasing power order."""

    coefficients: tuple

    def __post_init__(self):
        coef = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coefficients, dtype=float)))
        if len(coef) == 0:
            raise ValidationError("a polynomial needs at least one coefficient")
        if not all(np.isfinite(coef)):
            raise ValidationError("polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", coef)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def coef(self) -> np.ndarray:
        return np.asarray(self.coefficients)

    def __call__(self, x):
        return npoly.polyval(np.asarray(x, dtype=float), self.coef)

    def derivative(self) -> "Polynomial":
        d = npoly.polyder(self.coef)
        return Polynomial(d if len(d) else [0.0])

    def shifted(self, dx=0.0, dv=0.0) -> "Polynomial":
        """Curve translated by ``dv`` along the abscissa and ``dx`` along the value axis."""
        composed = np.polynomial.Polynomial(self.coef)(np.polynomial.Polynomial([-dv, 1.0])).coef
        coef = np.zeros(len(self.coefficients))
        coef[: len(composed)] = composed
        coef[0] += dx
        return Polynomial(coef)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coef))


def evaluate(poly: Polynomial, x):
    """Value of ``poly`` at ``x`` (scalar or array)."""
    return poly(x)


@dataclass(frozen=True, eq=False)
class FitProblem:
    """``m`` points ``(x, y)``, a target order ``n`` and a ridge weight ``lam``."""

    points: np.ndarray
    order: int = 4
    lam: float = 0.1

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValidationError("fit points must be finite")
        order = int(self.order)
        if order < 0:
            raise ValidationError(f"order must be >= 0, got {self.order}")
        lam = float(self.lam)
        if not lam >= 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        m = len(pts)
        if lam == 0 and m < order + 1:
            raise ValidationError(f"need at least {order + 1} points for an unregularized order-{order} fit, got {m}")
        if m < 1:
            raise ValidationError("need at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "lam", lam)

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    def design_matrix(self) -> np.ndarray:
        return vandermonde(self.x, self.order)


def vandermonde(x, order) -> np.ndarray:
    return np.vander(np.asarray(x, dtype=float), order + 1, increasing=True)


def _check_rank(problem: FitProblem):
    if problem.lam > 0:
        return
    distinct = len(np.unique(problem.x))
    if distinct < problem.order + 1:
        raise SingularSystemError(
            f"only {distinct} distinct abscissae for an unregularized order-{problem.order} fit")


def fit_polynomial(problem: FitProblem) -> Polynomial:
    """Regularized LS solution via the stacked system ``[A; lam I]``."""
    _check_rank(problem)
    A = problem.design_matrix()
    b = problem.y
    n1 = problem.order + 1
    if problem.lam > 0:
        A = np.vstack([A, problem.lam * np.eye(n1)])
        b = np.concatenate([b, np.zeros(n1)])
    c, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < n1:
        raise SingularSystemError("design matrix is rank deficient")
    return Polynomial(c)


def spectral_filter(s, lam):
    """Filter factors ``s / (s^2 + lam^2)``; zero for vanishing ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    nz = s > 0
    out[nz] = s[nz] / (s[nz] ** 2 + lam ** 2)
    return out


def fit_polynomial_svd(problem: FitProblem) -> Polynomial:
    """Regularized LS solution from the filtered SVD of the design matrix."""
    _check_rank(problem)
    A = problem.design_matrix()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if problem.lam == 0:
        tol = s.max() * max(A.shape) * np.finfo(float).eps
        if np.sum(s > tol) < problem.order + 1:
            raise SingularSystemError("design matrix is rank deficient")
    f = spectral_filter(s, problem.lam)
    c = Vt.T @ (f * (U.T @ problem.y))
    n1 = problem.order + 1
    if len(c) < n1:
        c = np.pad(c, (0, n1 - len(c)))
    return Polynomial(c)


_SOLVERS = {"normal": fit_polynomial, "svd": fit_polynomial_svd}


def fit_curve(points, order=4, lam=0.1, axis="y", method="normal") -> Polynomial:
    """Fit a curve to 2-D points with the abscissa rescaled to [-1, 1].

    ``axis="y"`` fits ``x = P(y)`` (the convention for the near-vertical
    LV walls); ``axis="x"`` fits ``y = P(x)``.  The ridge penalty acts on
    the rescaled, mean-centred problem, so the result is equivariant under
    translations of the input.  Coefficients are returned in raw pixel
    coordinates of the chosen abscissa.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if axis == "y":
        v, w = pts[:, 1], pts[:, 0]
    elif axis == "x":
        v, w = pts[:, 0], pts[:, 1]
    else:
        raise ValidationError(f"axis must be 'x' or 'y', got {axis!r}")
    if method not in _SOLVERS:
        raise ValidationError(f"unknown fit method {method!r}")
    lo, hi = float(v.min()), float(v.max())
    shift = 0.5 * (lo + hi)
    scale = 0.5 * (hi - lo) if hi > lo else 1.0
    mean_w = float(w.mean())
    t = (v - shift) / scale
    inner = _SOLVERS[method](FitProblem(np.column_stack([t, w - mean_w]), order, lam))
    return _unscale(inner.coef, shift, scale, mean_w)


def _unscale(coef, shift, scale, offset) -> Polynomial:
    # substitute t = (v - shift) / scale and add back the response offset
    t_of_v = np.polynomial.Polynomial([-shift / scale, 1.0 / scale])
    composed = np.polynomial.Polynomial(coef)(t_of_v).coef
    out = np.zeros(len(coef))
    out[: len(composed)] = composed
    out[0] += offset
    return Polynomial(out)
