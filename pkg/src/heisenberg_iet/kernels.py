"""Hot inner loops.

Every kernel exists twice: ``*_loop`` is written as plain loops and compiled
with numba, ``*_numpy`` is a vectorised (or, for inherently sequential orbit
iteration, scalar-Python) reference.  The public name binds to one of them
according to :data:`heisenberg_iet._accel.USE_NUMBA`.  Both variants take the
same float64 arrays describing the base interval exchange in pi0 order:

``left``    left endpoints of the continuity intervals (``left[0] == 0``)
``w``       translation vector
``h, b``    slopes and offsets of the affine skewing function
``total``   length of the base interval
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit, prange

# Interior cuts closer than this to a piece end are treated as coinciding with it.
PIECE_EPS = 1e-13


def _wrap_into(y: float, total: float) -> float:
    if y < 0.0:
        y = 0.0 if y > -1e-9 else y + total
    elif y >= total:
        y = y - total if y - total > 1e-9 else math.nextafter(total, 0.0)
    return y


_wrap_into_nb = njit(_wrap_into)


# ---------------------------------------------------------------- IET orbits


@njit
def _iet_orbit_loop(x0, n, left, w, total):
    d = left.shape[0]
    out = np.empty(n, dtype=np.float64)
    mind = np.inf
    x = x0
    for k in range(n):
        a = np.searchsorted(left, x, side="right") - 1
        if a < 0:
            a = 0
        for j in range(1, d):
            dist = abs(x - left[j])
            if dist < mind:
                mind = dist
        x = _wrap_into_nb(x + w[a], total)
        out[k] = x
    return out, mind


def _iet_orbit_numpy(x0, n, left, w, total):
    out = np.empty(n, dtype=np.float64)
    cuts = [float(c) for c in left[1:]]
    wl = [float(v) for v in w]
    mind = math.inf
    x = float(x0)
    for k in range(n):
        a = int(np.searchsorted(left, x, side="right")) - 1
        if a < 0:
            a = 0
        for c in cuts:
            dist = abs(x - c)
            if dist < mind:
                mind = dist
        x = _wrap_into(x + wl[a], total)
        out[k] = x
    return out, mind


# ---------------------------------------------------------- skew orbits (batch)


@njit(parallel=True)
def _skew_orbit_loop(x0, rho0, n, left, w, h, b, total):
    m = x0.shape[0]
    d = left.shape[0]
    xs = np.empty((m, n + 1), dtype=np.float64)
    rs = np.empty((m, n + 1), dtype=np.float64)
    mind = np.empty(m, dtype=np.float64)
    for i in prange(m):
        x = x0[i]
        r = rho0[i]
        md = np.inf
        xs[i, 0] = x
        rs[i, 0] = r
        for k in range(n):
            a = np.searchsorted(left, x, side="right") - 1
            if a < 0:
                a = 0
            for j in range(1, d):
                dist = abs(x - left[j])
                if dist < md:
                    md = dist
            r = r + h[a] * (x - left[a]) + b[a]
            r = r - math.floor(r)
            x = _wrap_into_nb(x + w[a], total)
            xs[i, k + 1] = x
            rs[i, k + 1] = r
        mind[i] = md
    return xs, rs, mind


def _skew_orbit_numpy(x0, rho0, n, left, w, h, b, total):
    x0 = np.asarray(x0, dtype=np.float64)
    rho0 = np.asarray(rho0, dtype=np.float64)
    m = x0.shape[0]
    xs = np.empty((m, n + 1))
    rs = np.empty((m, n + 1))
    cuts = left[1:]
    if m == 1:
        # scalar path: per-step numpy overhead dominates for a single long orbit
        lf = [float(c) for c in left]
        wl, hl, bl = ([float(v) for v in arr] for arr in (w, h, b))
        cl = lf[1:]
        x, r = float(x0[0]), float(rho0[0])
        md = math.inf
        xs[0, 0], rs[0, 0] = x, r
        xrow, rrow = xs[0], rs[0]
        for k in range(n):
            a = int(np.searchsorted(left, x, side="right")) - 1
            if a < 0:
                a = 0
            for c in cl:
                dist = abs(x - c)
                if dist < md:
                    md = dist
            r = r + hl[a] * (x - lf[a]) + bl[a]
            r -= math.floor(r)
            x = _wrap_into(x + wl[a], total)
            xrow[k + 1] = x
            rrow[k + 1] = r
        return xs, rs, np.array([md])
    x, r = x0.copy(), rho0.copy()
    xs[:, 0], rs[:, 0] = x, r
    md = np.full(m, np.inf)
    for k in range(n):
        a = np.clip(np.searchsorted(left, x, side="right") - 1, 0, None)
        if cuts.size:
            md = np.minimum(md, np.abs(x[:, None] - cuts[None, :]).min(axis=1))
        r = r + h[a] * (x - left[a]) + b[a]
        r -= np.floor(r)
        x = x + w[a]
        x = np.where(x < 0.0, np.where(x > -1e-9, 0.0, x + total), x)
        x = np.where(x >= total, np.where(x - total > 1e-9, x - total, np.nextafter(total, 0.0)), x)
        xs[:, k + 1], rs[:, k + 1] = x, r
    return xs, rs, md


# ------------------------------------------------- piecewise-affine cocycle pieces


@njit
def _propagate_pieces_loop(a, L, y, G, S, left, w, h, b, eps):
    m = a.shape[0]
    d = left.shape[0]
    cap = m * d
    na = np.empty(cap)
    nL = np.empty(cap)
    ny = np.empty(cap)
    nG = np.empty(cap)
    nS = np.empty(cap)
    k = 0
    for i in range(m):
        y0 = y[i]
        y1 = y0 + L[i]
        p = y0
        j = np.searchsorted(left, y0 + eps, side="right")
        while True:
            if j < d and left[j] < y1 - eps:
                q = left[j]
            else:
                q = y1
            mid = 0.5 * (p + q)
            al = np.searchsorted(left, mid, side="right") - 1
            if al < 0:
                al = 0
            na[k] = a[i] + (p - y0)
            nL[k] = q - p
            ny[k] = p + w[al]
            g = G[i] + S[i] * (p - y0) + h[al] * (p - left[al]) + b[al]
            nG[k] = g - math.floor(g)
            nS[k] = S[i] + h[al]
            k += 1
            if q >= y1:
                break
            p = q
            j += 1
    return na[:k], nL[:k], ny[:k], nG[:k], nS[:k]


def _propagate_pieces_numpy(a, L, y, G, S, left, w, h, b, eps):
    cuts = left[1:]
    y1 = y + L
    i0 = np.searchsorted(cuts, y + eps, side="right")
    i1 = np.searchsorted(cuts, y1 - eps, side="left")
    cnt = np.maximum(i1 - i0, 0)
    reps = cnt + 1
    owner = np.repeat(np.arange(a.shape[0]), reps)
    first = np.cumsum(reps) - reps
    j = np.arange(owner.shape[0]) - first[owner]
    cidx = i0[owner] + j
    if cuts.size:
        p = np.where(j == 0, y[owner], cuts[np.clip(cidx - 1, 0, cuts.size - 1)])
        q = np.where(j == cnt[owner], y1[owner], cuts[np.clip(cidx, 0, cuts.size - 1)])
    else:
        p, q = y[owner], y1[owner]
    al = np.clip(np.searchsorted(left, 0.5 * (p + q), side="right") - 1, 0, None)
    off = p - y[owner]
    g = G[owner] + S[owner] * off + h[al] * (p - left[al]) + b[al]
    return (a[owner] + off, q - p, p + w[al], g - np.floor(g), S[owner] + h[al])


# ----------------------------------------------------------- vertical flow batch


@njit(parallel=True)
def _flow_vertical_loop(alpha, x, s, rho, t, left, w, h, b, img_left, img_sym):
    m = x.shape[0]
    d = left.shape[0]
    oa = alpha.copy()
    ox = x.copy()
    os_ = s.copy()
    orh = rho.copy()
    mind = np.empty(m)
    for i in prange(m):
        a = oa[i]
        xi = ox[i]
        si = os_[i]
        ri = orh[i]
        tt = t[i]
        md = np.inf
        if tt >= 0.0:
            while True:
                rem = h[a] - si
                if tt < rem:
                    si += tt
                    ri += tt * (xi - left[a])
                    break
                ri += rem * (xi - left[a]) + b[a]
                tt -= rem
                for j in range(1, d):
                    dist = abs(xi - left[j])
                    if dist < md:
                        md = dist
                xi = xi + w[a]
                a = np.searchsorted(left, xi, side="right") - 1
                if a < 0:
                    a = 0
                si = 0.0
        else:
            tt = -tt
            while True:
                if tt <= si:
                    si -= tt
                    ri -= tt * (xi - left[a])
                    break
                ri -= si * (xi - left[a])
                tt -= si
                k = np.searchsorted(img_left, xi, side="right") - 1
                if k < 0:
                    k = 0
                a = img_sym[k]
                xi = xi - w[a]
                for j in range(1, d):
                    dist = abs(xi - left[j])
                    if dist < md:
                        md = dist
                ri -= b[a]
                si = h[a]
        ri = ri - math.floor(ri)
        oa[i] = a
        ox[i] = xi
        os_[i] = si
        orh[i] = ri
        mind[i] = md
    return oa, ox, os_, orh, mind


def _flow_vertical_numpy(alpha, x, s, rho, t, left, w, h, b, img_left, img_sym):
    a = alpha.copy()
    x = x.copy()
    s = s.copy()
    r = rho.copy()
    tt = np.abs(t).astype(np.float64)
    up = t >= 0.0
    cuts = left[1:]
    md = np.full(x.shape[0], np.inf)
    active = np.ones(x.shape[0], dtype=bool)
    while active.any():
        # upward movers
        rem = np.where(up, h[a] - s, s)
        done = active & (tt < rem) & up
        done |= active & (tt <= rem) & ~up
        sign = np.where(up, 1.0, -1.0)
        s = np.where(done, s + sign * tt, s)
        r = np.where(done, r + sign * tt * (x - left[a]), r)
        active &= ~done
        if not active.any():
            break
        cu = active & up
        cd = active & ~up
        # crossing the roof
        r = np.where(cu, r + rem * (x - left[a]) + b[a], r)
        tt = np.where(active, tt - rem, tt)
        if cuts.size:
            md = np.where(cu, np.minimum(md, np.abs(x[:, None] - cuts[None, :]).min(axis=1)), md)
        xn = np.where(cu, x + w[a], x)
        an = np.where(cu, np.clip(np.searchsorted(left, xn, side="right") - 1, 0, None), a)
        # crossing the floor
        r = np.where(cd, r - s * (x - left[a]), r)
        k = np.clip(np.searchsorted(img_left, xn, side="right") - 1, 0, None)
        prev = img_sym[k]
        an = np.where(cd, prev, an)
        xn = np.where(cd, xn - w[prev], xn)
        if cuts.size:
            md = np.where(cd, np.minimum(md, np.abs(xn[:, None] - cuts[None, :]).min(axis=1)), md)
        r = np.where(cd, r - b[prev], r)
        s = np.where(cu, 0.0, np.where(cd, h[prev], s))
        a, x = an, xn
    r = r - np.floor(r)
    return a, x, s, r, md


# ------------------------------------------------------------------- dispatch

KERNELS = {
    "iet_orbit": (_iet_orbit_loop, _iet_orbit_numpy),
    "skew_orbit": (_skew_orbit_loop, _skew_orbit_numpy),
    "propagate_pieces": (_propagate_pieces_loop, _propagate_pieces_numpy),
    "flow_vertical": (_flow_vertical_loop, _flow_vertical_numpy),
}

_pick = 0 if USE_NUMBA else 1
iet_orbit_kernel = KERNELS["iet_orbit"][_pick]
skew_orbit_kernel = KERNELS["skew_orbit"][_pick]
propagate_pieces_kernel = KERNELS["propagate_pieces"][_pick]
flow_vertical_kernel = KERNELS["flow_vertical"][_pick]
