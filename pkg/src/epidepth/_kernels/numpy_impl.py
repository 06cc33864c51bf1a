"""Pure-numpy implementations of the hot kernels.

Reference path for the numba backend: both backends must produce
bit-identical outputs (the test suite asserts exact equality).
"""

from __future__ import annotations

import numpy as np

# Sentinel key for empty nearest-neighbor candidates; real keys stay far
# below it, and adding a squared pixel distance cannot overflow int64.
_INF_KEY = np.int64(1) << 61
# Above this the lexicographic key no longer fits the exactness analysis.
_MAX_KEY_BUDGET = float(1 << 52)


def scatter_min(iu, iv, depth, height, width):
    """Min-depth rasterization of points already clipped to the image.

    Returns (depthmap, collisions) where collisions counts points that
    landed on an already-claimed pixel.
    """
    flat = iv.astype(np.int64) * width + iu.astype(np.int64)
    out = np.full(height * width, np.inf)
    np.minimum.at(out, flat, depth)
    occupied = np.unique(flat).size
    out[np.isinf(out)] = 0.0
    return out.reshape(height, width), int(flat.size - occupied)


def occupancy_count(codes, n_cells):
    """Number of distinct cell codes."""
    return int(np.unique(codes).size)


def bilinear_many(grid, u, v):
    """Bilinear samples at continuous (u, v); callers guarantee in-bounds.

    Coordinates are clamped by one ulp-scale guard so that exactly-boundary
    queries never index out of range.
    """
    h, w = grid.shape
    x0 = np.clip(np.floor(u).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(v).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(u - x0, 0.0, 1.0)
    fy = np.clip(v - y0, 0.0, 1.0)
    top = (1.0 - fx) * grid[y0, x0] + fx * grid[y0, x1]
    bot = (1.0 - fx) * grid[y1, x0] + fx * grid[y1, x1]
    return (1.0 - fy) * top + fy * bot


def nn_fill(values):
    """Exact nearest-valid-pixel fill (entries <= 0 are invalid).

    Minimizes the lexicographic key (squared distance, source row, source
    column) encoded as one integer, so ties resolve to the smallest source
    row, then column.  Caller guarantees at least one valid pixel.
    """
    h, w = values.shape
    m = np.int64(h * w)
    if float(m) * float(h * h + w * w) > _MAX_KEY_BUDGET:
        raise NotImplementedError("depthmap too large for exact NN fill")
    valid = values > 0
    rows = np.arange(h, dtype=np.int64)
    cols = np.arange(w, dtype=np.int64)
    tie = rows[:, None] * w + cols[None, :]
    tie = np.where(valid, tie, _INF_KEY)

    # Column pass: per (target row, column) the best source within the column.
    colkey = np.empty((h, w), dtype=np.int64)
    row_chunk = max(1, int(8_000_000 // max(1, h * w)))
    for r0 in range(0, h, row_chunk):
        r1 = min(r0 + row_chunk, h)
        d2 = (rows[r0:r1, None] - rows[None, :]) ** 2 * m
        colkey[r0:r1] = (d2[:, :, None] + tie[None, :, :]).min(axis=1)

    # Row pass: combine column candidates across the row.
    flat_vals = values.reshape(-1)
    out = np.empty_like(values, dtype=np.float64)
    col_chunk = max(1, int(4_000_000 // max(1, w)))
    d2u_full = (cols[:, None] - cols[None, :]) ** 2 * m
    for r in range(h):
        ck = colkey[r][None, :]
        for c0 in range(0, w, col_chunk):
            c1 = min(c0 + col_chunk, w)
            best = (d2u_full[c0:c1] + ck).min(axis=1)
            out[r, c0:c1] = flat_vals[best % m]
    return out


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
    """Walk the reverse epipolar line of every point over the densified map.

    For step k the inspection pixel is p - n*k*dt; its depth is bilinearly
    sampled, back-projected, translated and re-projected, and the gap
    g = n . (q - q2) is tested against the threshold.  Stops are
    pre-computed per point in max_steps.  Returns (flagged, min_g,
    occluder_u, occluder_v, hit_step).
    """
    n_pts = p_uv.shape[0]
    flagged = np.zeros(n_pts, dtype=bool)
    min_g = np.full(n_pts, np.inf)
    occ_u = np.full(n_pts, np.nan)
    occ_v = np.full(n_pts, np.nan)
    hit_step = np.full(n_pts, -1, dtype=np.int64)

    active = np.flatnonzero(max_steps > 0)
    if active.size == 0:
        return flagged, min_g, occ_u, occ_v, hit_step
    nx = (q_uv[active, 0] - p_uv[active, 0]) / t1[active]
    ny = (q_uv[active, 1] - p_uv[active, 1]) / t1[active]
    k = 1
    while active.size:
        u2 = p_uv[active, 0] - nx * (k * dt)
        v2 = p_uv[active, 1] - ny * (k * dt)
        d2 = bilinear_many(dense, u2, v2)
        zz = d2 + tz
        usable = (d2 > 0) & (zz > z_eps)
        g = np.full(active.size, np.inf)
        if np.any(usable):
            x = (u2[usable] - cx) * d2[usable] / fx
            y = (v2[usable] - cy) * d2[usable] / fy
            q2u = fx * (x + tx) / zz[usable] + cx
            q2v = fy * (y + ty) / zz[usable] + cy
            g[usable] = nx[usable] * (q_uv[active[usable], 0] - q2u) + ny[
                usable
            ] * (q_uv[active[usable], 1] - q2v)
        np.minimum.at(min_g, active, g)
        fire = g < threshold
        if np.any(fire):
            hit = active[fire]
            flagged[hit] = True
            occ_u[hit] = u2[fire]
            occ_v[hit] = v2[fire]
            hit_step[hit] = k
        alive = ~fire & (k < max_steps[active])
        active = active[alive]
        nx = nx[alive]
        ny = ny[alive]
        k += 1
    return flagged, min_g, occ_u, occ_v, hit_step
