"""Depthmap rasterization, nearest-neighbor densification, bilinear sampling.

Depthmaps are 2-D float64 arrays in meters.  Entries ``<= 0`` are the
invalid sentinel (``INVALID_DEPTH = 0.0``) and never take part in
arithmetic.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .geometry import CameraIntrinsics, RigidPose, as_points, project, rasterize_px

INVALID_DEPTH = 0.0


def valid_mask(depthmap: np.ndarray) -> np.ndarray:
    return np.asarray(depthmap) > 0


def empty_depthmap(intr: CameraIntrinsics) -> np.ndarray:
    return np.zeros((intr.height, intr.width))


def rasterize_depthmap(
    cloud,
    pose: RigidPose,
    intr: CameraIntrinsics,
    policy: str = "min-depth",
    return_collisions: bool = False,
):
    """Project a cloud into a per-pixel depth grid.

    Points behind the camera or outside the image are dropped.  When two or
    more points land on the same pixel the ``min-depth`` policy keeps the
    smaller depth (depth buffering).  ``return_collisions`` additionally
    reports how many points lost that race.
    """
    if policy != "min-depth":
        raise ValueError(f"unknown rasterization policy {policy!r}")
    pts = as_points(cloud)
    out = empty_depthmap(intr)
    if pts.shape[0] == 0:
        return (out, 0) if return_collisions else out
    uv, depth, visible = project(pts, pose, intr)
    px = rasterize_px(np.nan_to_num(uv, nan=-1.0))
    inside = (
        visible
        & (px[:, 0] >= 0)
        & (px[:, 0] < intr.width)
        & (px[:, 1] >= 0)
        & (px[:, 1] < intr.height)
    )
    if not np.any(inside):
        return (out, 0) if return_collisions else out
    out, collisions = _kernels.scatter_min(
        px[inside, 0], px[inside, 1], depth[inside], intr.height, intr.width
    )
    return (out, collisions) if return_collisions else out


def densify_nn(sparse: np.ndarray) -> np.ndarray:
    """Fill every pixel with the depth of its nearest valid pixel.

    Exact Euclidean nearest neighbor over the full image (unbounded
    radius); distance ties resolve to the source with the smaller row,
    then the smaller column.  Valid pixels keep their own value.
    """
    sparse = np.asarray(sparse, dtype=np.float64)
    if sparse.ndim != 2:
        raise ValueError("depthmap must be 2-D")
    if not np.any(sparse > 0):
        raise ValueError("empty depthmap")
    return _kernels.nn_fill(sparse)


def sample_bilinear(dense: np.ndarray, u, v):
    """Bilinear blend of the 4 pixels surrounding (u, v).

    Raises ValueError("outside map") when the query leaves
    ``[0, width-1] x [0, height-1]``; scalar in, scalar out.
    """
    dense = np.asarray(dense, dtype=np.float64)
    h, w = dense.shape
    uu = np.atleast_1d(np.asarray(u, dtype=np.float64))
    vv = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if np.any(uu < 0) or np.any(uu > w - 1) or np.any(vv < 0) or np.any(vv > h - 1):
        raise ValueError("outside map")
    vals = _kernels.bilinear_many(dense, uu, vv)
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(vals[0])
    return vals
