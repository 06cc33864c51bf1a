"""Numba implementations of the hot kernels.

Mirrors numpy_impl function-for-function; outputs are bit-identical
(asserted by the test suite), only faster.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INF_KEY = np.int64(1) << 61
_MAX_KEY_BUDGET = float(1 << 52)


@njit(cache=True)
def _scatter_min_impl(flat, depth, n_cells):
    out = np.full(n_cells, np.inf)
    hits = np.zeros(n_cells, dtype=np.uint8)
    collisions = 0
    for i in range(flat.shape[0]):
        j = flat[i]
        if hits[j]:
            collisions += 1
        else:
            hits[j] = 1
        if depth[i] < out[j]:
            out[j] = depth[i]
    for j in range(n_cells):
        if np.isinf(out[j]):
            out[j] = 0.0
    return out, collisions


def scatter_min(iu, iv, depth, height, width):
    flat = iv.astype(np.int64) * width + iu.astype(np.int64)
    out, collisions = _scatter_min_impl(
        flat, np.ascontiguousarray(depth, dtype=np.float64), height * width
    )
    return out.reshape(height, width), int(collisions)


@njit(cache=True)
def _occupancy_impl(codes, n_cells):
    seen = np.zeros(n_cells, dtype=np.uint8)
    count = 0
    for i in range(codes.shape[0]):
        c = codes[i]
        if not seen[c]:
            seen[c] = 1
            count += 1
    return count


def occupancy_count(codes, n_cells):
    return int(_occupancy_impl(np.ascontiguousarray(codes, dtype=np.int64), n_cells))


@njit(cache=True, inline="always")
def _bilinear_scalar(grid, u, v):
    h, w = grid.shape
    x0 = int(np.floor(u))
    y0 = int(np.floor(v))
    if x0 < 0:
        x0 = 0
    elif x0 > w - 1:
        x0 = w - 1
    if y0 < 0:
        y0 = 0
    elif y0 > h - 1:
        y0 = h - 1
    x1 = x0 + 1 if x0 + 1 < w else w - 1
    y1 = y0 + 1 if y0 + 1 < h else h - 1
    fx = u - x0
    if fx < 0.0:
        fx = 0.0
    elif fx > 1.0:
        fx = 1.0
    fy = v - y0
    if fy < 0.0:
        fy = 0.0
    elif fy > 1.0:
        fy = 1.0
    top = (1.0 - fx) * grid[y0, x0] + fx * grid[y0, x1]
    bot = (1.0 - fx) * grid[y1, x0] + fx * grid[y1, x1]
    return (1.0 - fy) * top + fy * bot


@njit(cache=True)
def _bilinear_many_impl(grid, u, v):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _bilinear_scalar(grid, u[i], v[i])
    return out


def bilinear_many(grid, u, v):
    return _bilinear_many_impl(
        np.ascontiguousarray(grid, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
    )


@njit(cache=True)
def _nn_fill_impl(values):
    h, w = values.shape
    m = np.int64(h) * np.int64(w)

    # Column pass: nearest valid row per column, ties to the smaller row.
    colkey = np.full((h, w), _INF_KEY, dtype=np.int64)
    for u in range(w):
        last = -1
        for r in range(h):
            if values[r, u] > 0:
                last = r
            if last >= 0:
                g = np.int64(r - last)
                colkey[r, u] = g * g * m + np.int64(last) * w + u
        nxt = -1
        for r in range(h - 1, -1, -1):
            if values[r, u] > 0:
                nxt = r
            if nxt >= 0:
                g = np.int64(nxt - r)
                # key comparison also breaks distance ties toward the
                # smaller source row
                cand = g * g * m + np.int64(nxt) * w + u
                if cand < colkey[r, u]:
                    colkey[r, u] = cand

    # Row pass: lower envelope of parabolas keyed by the column candidates.
    out = np.empty((h, w))
    flat = values.reshape(-1)
    vbuf = np.empty(w, dtype=np.int64)
    zbuf = np.empty(w + 1)
    for r in range(h):
        k = -1
        for u in range(w):
            fu = colkey[r, u]
            if fu >= _INF_KEY:
                continue
            if k < 0:
                k = 0
                vbuf[0] = u
                zbuf[0] = -1e300
                zbuf[1] = 1e300
                continue
            while True:
                q = vbuf[k]
                num = (fu - colkey[r, q]) + m * (np.int64(u) * u - np.int64(q) * q)
                s = float(num) / float(2 * m * (u - q))
                if s <= zbuf[k]:
                    k -= 1
                else:
                    break
            k += 1
            vbuf[k] = u
            zbuf[k] = s
            zbuf[k + 1] = 1e300
        j = 0
        for c in range(w):
            while zbuf[j + 1] < c:
                j += 1
            q = vbuf[j]
            dc = np.int64(c - q)
            key = dc * dc * m + colkey[r, q]
            out[r, c] = flat[key % m]
    return out


def nn_fill(values):
    h, w = values.shape
    if float(h * w) * float(h * h + w * w) > _MAX_KEY_BUDGET:
        raise NotImplementedError("depthmap too large for exact NN fill")
    return _nn_fill_impl(np.ascontiguousarray(values, dtype=np.float64))


@njit(cache=True)
def _sweep_impl(
    p_uv,
    q_uv,
    t1,
    max_steps,
    dense,
    fx,
    fy,
    cx,
    cy,
    tx,
    ty,
    tz,
    dt,
    threshold,
    z_eps,
):
    n_pts = p_uv.shape[0]
    flagged = np.zeros(n_pts, dtype=np.bool_)
    min_g = np.full(n_pts, np.inf)
    occ_u = np.full(n_pts, np.nan)
    occ_v = np.full(n_pts, np.nan)
    hit_step = np.full(n_pts, -1, dtype=np.int64)
    for i in range(n_pts):
        ms = max_steps[i]
        if ms <= 0:
            continue
        nx = (q_uv[i, 0] - p_uv[i, 0]) / t1[i]
        ny = (q_uv[i, 1] - p_uv[i, 1]) / t1[i]
        for k in range(1, ms + 1):
            u2 = p_uv[i, 0] - nx * (k * dt)
            v2 = p_uv[i, 1] - ny * (k * dt)
            d2 = _bilinear_scalar(dense, u2, v2)
            zz = d2 + tz
            if d2 <= 0 or zz <= z_eps:
                continue
            x = (u2 - cx) * d2 / fx
            y = (v2 - cy) * d2 / fy
            q2u = fx * (x + tx) / zz + cx
            q2v = fy * (y + ty) / zz + cy
            g = nx * (q_uv[i, 0] - q2u) + ny * (q_uv[i, 1] - q2v)
            if g < min_g[i]:
                min_g[i] = g
            if g < threshold:
                flagged[i] = True
                occ_u[i] = u2
                occ_v[i] = v2
                hit_step[i] = k
                break
    return flagged, min_g, occ_u, occ_v, hit_step


def epipolar_sweep(
    p_uv,
    q_uv,
    t1,
    max_steps,
    dense,
    fx,
    fy,
    cx,
    cy,
    tx,
    ty,
    tz,
    dt,
    threshold,
    z_eps,
):
    return _sweep_impl(
        np.ascontiguousarray(p_uv, dtype=np.float64),
        np.ascontiguousarray(q_uv, dtype=np.float64),
        np.ascontiguousarray(t1, dtype=np.float64),
        np.ascontiguousarray(max_steps, dtype=np.int64),
        np.ascontiguousarray(dense, dtype=np.float64),
        float(fx),
        float(fy),
        float(cx),
        float(cy),
        float(tx),
        float(ty),
        float(tz),
        float(dt),
        float(threshold),
        float(z_eps),
    )
