"""Reference artifact-removal baselines.

``raw_halfocc`` is plain depth buffering: when several points rasterize to
one pixel only the nearest survives — the unprocessed depthmap convention.
``modified_halfocc`` warps the densified virtual depthmap into the target
view and drops every point deeper than the warped surface (with a small
relative slack to absorb interpolation error).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .densify import rasterize_depthmap
from .geometry import CameraIntrinsics, RigidPose, as_points, back_project, project
from .occlusion import OcclusionResult, ReplayConfig, _Frame

# Relative depth slack of the warp comparison; a strict comparison removes
# nearly everything because of interpolation noise.
MOD_HALFOCC_SLACK = 0.01


def raw_halfocc(cloud, pose: RigidPose, intr_rgb: CameraIntrinsics) -> np.ndarray:
    """Depth-buffered rasterization into the target camera."""
    return rasterize_depthmap(cloud, pose, intr_rgb, policy="min-depth")


def modified_halfocc(
    cloud,
    pose: RigidPose,
    intr_rgb: CameraIntrinsics,
    cfg: ReplayConfig = ReplayConfig(),
) -> OcclusionResult:
    """Remove points deeper than the back-projected densified virtual map.

    Shares the virtual-camera preparation with the occlusion detector;
    pixels of the target view with no warped counterpart are kept.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    frame = _Frame(pts, pose, intr_rgb, cfg, None, None)

    n_pts = pts.shape[0]
    flagged = np.zeros(n_pts, dtype=bool)
    if frame.dense_virtual is not None:
        warped = _warp_virtual(frame)
        idx = np.flatnonzero(frame.in_rgb)
        w_vals = warped[frame.px_r[idx, 1], frame.px_r[idx, 0]]
        has_ref = w_vals > 0
        flagged[idx[has_ref]] = frame.d_rgb[idx[has_ref]] > w_vals[has_ref] * (
            1.0 + MOD_HALFOCC_SLACK
        )

    occluded = np.flatnonzero(frame.in_rgb & flagged)
    kept = np.flatnonzero(frame.in_rgb & ~flagged)
    return OcclusionResult(
        occluded=occluded,
        kept=kept,
        clean_depthmap=frame.rasterize_rgb(kept),
        diagnostics=None,
    )


def _warp_virtual(frame: _Frame) -> np.ndarray:
    """Forward-project every densified virtual pixel into the target view."""
    vi = frame.virtual_intr
    uu, vv = np.meshgrid(
        np.arange(vi.width, dtype=np.float64),
        np.arange(vi.height, dtype=np.float64),
    )
    uv = np.stack([uu.ravel(), vv.ravel()], axis=1)
    pts = back_project(uv, frame.dense_virtual.ravel(), vi)
    pose_t = RigidPose(np.eye(3), frame.t_eff)
    q, depth, visible = project(pts, pose_t, frame.intr_rgb)
    px = np.floor(np.nan_to_num(q, nan=-1.0) + 0.5).astype(np.int64)
    keep = (
        visible
        & (px[:, 0] >= 0)
        & (px[:, 0] < frame.intr_rgb.width)
        & (px[:, 1] >= 0)
        & (px[:, 1] < frame.intr_rgb.height)
    )
    if not np.any(keep):
        return np.zeros((frame.intr_rgb.height, frame.intr_rgb.width))
    warped, _ = _kernels.scatter_min(
        px[keep, 0],
        px[keep, 1],
        depth[keep],
        frame.intr_rgb.height,
        frame.intr_rgb.width,
    )
    return warped
