"""Compiled inner loops for the level-set solver."""

import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def region_sums(phi, u, eps):
    """Smoothed-Heaviside weighted sums for the inside/outside means."""
    ny, nx = phi.shape
    w_in = 0.0
    s_in = 0.0
    w_out = 0.0
    s_out = 0.0
    n_pos = 0
    total = 0.0
    for i in range(ny):
        for j in range(nx):
            p = phi[i, j]
            h = 0.5 + math.atan(p / eps) / math.pi
            v = u[i, j]
            w_in += h
            s_in += h * v
            w_out += 1.0 - h
            s_out += (1.0 - h) * v
            total += v
            if p >= 0.0:
                n_pos += 1
    return w_in, s_in, w_out, s_out, n_pos, total


@numba.njit(cache=True, nogil=True)
def region_means(phi, u, eps):
    w_in, s_in, w_out, s_out, n_pos, total = region_sums(phi, u, eps)
    n = phi.shape[0] * phi.shape[1]
    if n_pos == 0 or n_pos == n or w_in <= 0.0 or w_out <= 0.0:
        g = total / n
        return g, g
    return s_in / w_in, s_out / w_out


@numba.njit(cache=True, nogil=True)
def _means_from_sums(w_in, s_in, w_out, s_out, n_pos, total, n):
    if n_pos == 0 or n_pos == n or w_in <= 0.0 or w_out <= 0.0:
        g = total / n
        return g, g
    return s_in / w_in, s_out / w_out


@numba.njit(cache=True, nogil=True)
def cv_steps(phi, u, n_steps, mu, nu, lambda1, lambda2, dt, eps, eta, band):
    """Run ``n_steps`` updates in place; returns ``(failed_step, flips)``.

    ``failed_step`` is -1 when every value stayed finite.  ``flips`` counts
    pixels whose sign changed during the final step.

    Curvature is handled with one Jacobi sweep of the semi-implicit
    scheme (coefficients from the current field, Neumann boundary by
    index clamping); the region force is explicit.  The step is divided
    by the squared region contrast so that ``dt`` is dimensionless.

    Only pixels with ``|phi| < band`` at entry are updated; the others are
    too far from the front to change sign before the next redistancing.
    The region sums are kept current incrementally over the band.
    """
    ny, nx = phi.shape
    n = ny * nx
    inv_pi = 1.0 / math.pi
    eta2 = eta * eta
    w_in, s_in, w_out, s_out, n_pos, total = region_sums(phi, u, eps)
    m = 0
    for i in range(ny):
        for j in range(nx):
            if abs(phi[i, j]) < band:
                m += 1
    rows = np.empty(m, dtype=np.int64)
    cols = np.empty(m, dtype=np.int64)
    vals = np.empty(m)
    k = 0
    for i in range(ny):
        for j in range(nx):
            if abs(phi[i, j]) < band:
                rows[k] = i
                cols[k] = j
                k += 1
    flips = 0
    for step in range(n_steps):
        c1, c2 = _means_from_sums(w_in, s_in, n - w_in, total - s_in, n_pos, total, n)
        contrast = (c1 - c2) * (c1 - c2)
        if contrast < 1.0:
            contrast = 1.0
        tau = dt / contrast
        for b in range(m):
            i = rows[b]
            j = cols[b]
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < ny - 1 else ny - 1
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < nx - 1 else nx - 1
            p = phi[i, j]
            pr = phi[i, jp]
            pl = phi[i, jm]
            pd = phi[ip, j]
            pu = phi[im, j]
            dy0 = 0.5 * (pd - pu)
            dx0 = 0.5 * (pr - pl)
            dyl = 0.5 * (phi[ip, jm] - phi[im, jm])
            dxu = 0.5 * (phi[im, jp] - phi[im, jm])
            cr = 1.0 / math.sqrt(eta2 + (pr - p) ** 2 + dy0 * dy0)
            cl = 1.0 / math.sqrt(eta2 + (p - pl) ** 2 + dyl * dyl)
            cd = 1.0 / math.sqrt(eta2 + (pd - p) ** 2 + dx0 * dx0)
            cu = 1.0 / math.sqrt(eta2 + (p - pu) ** 2 + dxu * dxu)
            delta = eps * inv_pi / (eps * eps + p * p)
            kk = tau * delta * mu
            v = u[i, j]
            force = -nu - lambda1 * (v - c1) ** 2 + lambda2 * (v - c2) ** 2
            smoothed = (p + kk * (cr * pr + cl * pl + cd * pd + cu * pu)) / (
                1.0 + kk * (cr + cl + cd + cu))
            q = smoothed + tau * delta * force
            if not math.isfinite(q):
                return step, 0
            vals[b] = q
        flips = 0
        for b in range(m):
            i = rows[b]
            j = cols[b]
            p = phi[i, j]
            q = vals[b]
            v = u[i, j]
            dh = (math.atan(q / eps) - math.atan(p / eps)) * inv_pi
            w_in += dh
            s_in += dh * v
            if q >= 0.0 and p < 0.0:
                n_pos += 1
            elif q < 0.0 and p >= 0.0:
                n_pos -= 1
            if (q > 0.0) != (p > 0.0):
                flips += 1
            phi[i, j] = q
    return -1, flips


@numba.njit(cache=True, nogil=True)
def _edt_1d(f, n, d, v, z):
    # lower envelope of parabolas rooted at the samples of f
    k = 0
    v[0] = 0
    z[0] = -1e300
    z[1] = 1e300
    for q in range(1, n):
        s = 0.0
        while True:
            r = v[k]
            s = ((f[q] + q * q) - (f[r] + r * r)) / (2.0 * q - 2.0 * r)
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = 1e300
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        r = v[k]
        d[q] = (q - r) * (q - r) + f[r]


@numba.njit(cache=True, nogil=True)
def squared_edt(mask):
    """Squared Euclidean distance from every True pixel to the nearest False pixel.

    False pixels get 0.  If no pixel is False the distances are huge.
    The column pass is two linear scans; the row pass is the exact lower
    envelope of parabolas.
    """
    ny, nx = mask.shape
    big = 1e12
    g = np.empty((ny, nx))
    for j in range(nx):
        run = big
        for i in range(ny):
            if mask[i, j]:
                run = run + 1.0 if run < big else big
            else:
                run = 0.0
            g[i, j] = run
        run = big
        for i in range(ny - 1, -1, -1):
            if mask[i, j]:
                run = run + 1.0 if run < big else big
            else:
                run = 0.0
            if run < g[i, j]:
                g[i, j] = run
    for i in range(ny):
        for j in range(nx):
            v = g[i, j]
            g[i, j] = v * v if v < big else big
    nmax = nx
    f = np.empty(nmax)
    d = np.empty(nmax)
    v = np.empty(nmax, dtype=np.int64)
    z = np.empty(nmax + 1)
    for i in range(ny):
        for j in range(nx):
            f[j] = g[i, j]
        _edt_1d(f, nx, d, v, z)
        for j in range(nx):
            g[i, j] = d[j]
    return g


@numba.njit(cache=True, nogil=True)
def redistance(phi):
    """Signed distance with the same sign pattern as ``phi``.

    Interface cells (4-neighbour of a sign change) keep the first-order
    estimate ``phi / |grad phi|`` clipped to [-1, 1]; all other cells take
    the distance to the nearest cell of opposite sign, minus half a pixel.
    """
    ny, nx = phi.shape
    inside = phi > 0
    d_in = squared_edt(inside)
    d_out = squared_edt(~inside)
    out = np.empty_like(phi)
    for i in range(ny):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < ny - 1 else ny - 1
        for j in range(nx):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < nx - 1 else nx - 1
            s = inside[i, j]
            if (inside[im, j] != s or inside[ip, j] != s
                    or inside[i, jm] != s or inside[i, jp] != s):
                gx = 0.5 * (phi[i, jp] - phi[i, jm])
                gy = 0.5 * (phi[ip, j] - phi[im, j])
                g = math.sqrt(gx * gx + gy * gy)
                if g < 1e-8:
                    g = 1e-8
                e = phi[i, j] / g
                out[i, j] = min(1.0, max(-1.0, e))
            elif s:
                out[i, j] = math.sqrt(d_in[i, j]) - 0.5
            else:
                out[i, j] = -(math.sqrt(d_out[i, j]) - 0.5)
    return out


@numba.njit(cache=True, nogil=True)
def polyline_distance(xs, ys, vx, vy):
    """Unsigned distance from each grid point to a closed polyline."""
    ny = ys.shape[0]
    nx = xs.shape[0]
    nv = vx.shape[0]
    out = np.empty((ny, nx))
    for i in range(ny):
        y = ys[i]
        for j in range(nx):
            x = xs[j]
            best = 1e300
            for k in range(nv):
                ax = vx[k]
                ay = vy[k]
                bx = vx[(k + 1) % nv]
                by = vy[(k + 1) % nv]
                ex = bx - ax
                ey = by - ay
                ll = ex * ex + ey * ey
                t = 0.0
                if ll > 0.0:
                    t = ((x - ax) * ex + (y - ay) * ey) / ll
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                dx = ax + t * ex - x
                dy = ay + t * ey - y
                d = dx * dx + dy * dy
                if d < best:
                    best = d
            out[i, j] = math.sqrt(best)
    return out
