"""Removal of projective artifacts via the epipolar-occlusion test.

Pipeline: (1) optional origin auto-calibration, folded into the effective
translation; (2) a virtual camera at the cloud origin with a widened field
of view; (3) sparse virtual depthmap, densified by nearest neighbor; (4)
per point, a walk along the reverse epipolar direction over the densified
map — the point is occluded as soon as an inspection pixel, explicitly
projected through the pure translation, surpasses it in the target view;
(5) a cleaned target-view depthmap rasterized from the surviving points.

Rotation never contributes to the occlusion (it is a homography between
the views), so the test runs entirely in the rotated frame against the
pure-translation remainder of the pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .autocalib import DescentSpec, RasterSpec, auto_calibrate
from .densify import densify_nn
from .geometry import (
    VISIBILITY_EPS,
    CameraIntrinsics,
    RigidPose,
    as_points,
    back_project,
    project,
    rasterize_px,
    unify_intrinsics,
)

_DEGENERATE_T = 1e-12


@dataclass(frozen=True)
class ReplayConfig:
    """Occlusion-test configuration.

    lam: threshold on the gap g in pixels; -inf selects the strict
        "flag on first g < 0" reading.  A finite negative value demands
        surpassing by at least |lam| pixels.
    dt: epipolar step in pixels; sub-pixel so a one-pixel occluder cannot
        be skipped.
    fov_margin: linear widening factor of the virtual camera.
    d_min: minimum plausible scene depth in meters; bounds the walk, since
        no occluder can displace farther than a point at d_min.
    autocalib: recover the cloud origin before testing.
    epsilon: extra non-negative slack subtracted from the threshold.
    """

    lam: float = -math.inf
    dt: float = 0.5
    fov_margin: float = 1.25
    d_min: float = 1.0
    autocalib: bool = True
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.fov_margin >= 1:
            raise ValueError("fov_margin must be >= 1")
        if not self.d_min > 0:
            raise ValueError("d_min must be positive")
        if not self.lam <= 0:
            raise ValueError("lam must be <= 0")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")

    @property
    def threshold(self) -> float:
        base = 0.0 if math.isinf(self.lam) else self.lam
        return base - self.epsilon


@dataclass(frozen=True)
class OcclusionResult:
    """Occluded/kept split over the points visible in the target view."""

    occluded: np.ndarray
    kept: np.ndarray
    clean_depthmap: np.ndarray
    diagnostics: Optional[dict] = None


def make_virtual_camera(
    intr_rgb: CameraIntrinsics, fov_margin: float
) -> CameraIntrinsics:
    """Same focal lengths, image padded by fov_margin, principal point
    recentered so the original frustum sits strictly inside."""
    if fov_margin < 1:
        raise ValueError("fov_margin must be >= 1")
    width = int(math.ceil(intr_rgb.width * fov_margin))
    height = int(math.ceil(intr_rgb.height * fov_margin))
    return CameraIntrinsics(
        fx=intr_rgb.fx,
        fy=intr_rgb.fy,
        cx=intr_rgb.cx + (width - intr_rgb.width) / 2.0,
        cy=intr_rgb.cy + (height - intr_rgb.height) / 2.0,
        width=width,
        height=height,
    )


def _translation_of(translation) -> np.ndarray:
    if isinstance(translation, RigidPose):
        if not np.allclose(translation.rotation, np.eye(3), atol=1e-12):
            raise ValueError("expected a pure-translation pose")
        return translation.translation
    return np.asarray(translation, dtype=np.float64).reshape(3)


def _displace(uv: np.ndarray, depth: float, intr: CameraIntrinsics, t: np.ndarray):
    """Pixel displacement of a hypothetical point at the given depth.

    +inf where the translated point falls behind the camera (no bound).
    """
    uv = np.atleast_2d(uv)
    pts = back_project(uv, depth, intr)
    zz = depth + t[2]
    if zz <= VISIBILITY_EPS:
        return np.full(uv.shape[0], np.inf)
    qu = intr.fx * (pts[:, 0] + t[0]) / zz + intr.cx
    qv = intr.fy * (pts[:, 1] + t[1]) / zz + intr.cy
    return np.hypot(qu - uv[:, 0], qv - uv[:, 1])


def occlusion_gap(p1_uv, p2_uv, d1, d2, translation, intr: CameraIntrinsics):
    """Signed epipolar gap g between a query pixel and an inspection pixel.

    Both pixels are back-projected at their depths and pushed through the
    pure translation; g = n . (q1 - q2) with n the unit epipolar direction
    at the query.  g > 0: the inspection pixel has not reached the query's
    translated position; g = 0: exact overlap; g < 0: it surpassed.
    Returns None when the query has no epipolar motion (degenerate).
    """
    t = _translation_of(translation)
    p1 = np.asarray(p1_uv, dtype=np.float64).reshape(2)
    p2 = np.asarray(p2_uv, dtype=np.float64).reshape(2)
    if d1 <= 0 or d2 <= 0:
        raise ValueError("depths must be positive")
    if d1 + t[2] <= VISIBILITY_EPS or d2 + t[2] <= VISIBILITY_EPS:
        raise ValueError("point projects behind the translated camera")

    def _push(uv, d):
        pt = back_project(uv[None, :], d, intr)[0] + t
        return np.array(
            [intr.fx * pt[0] / pt[2] + intr.cx, intr.fy * pt[1] / pt[2] + intr.cy]
        )

    q1 = _push(p1, d1)
    q2 = _push(p2, d2)
    t1 = float(np.hypot(*(q1 - p1)))
    if t1 <= _DEGENERATE_T:
        return None
    n = (q1 - p1) / t1
    return float(n @ (q1 - q2))


def _walk_limits(
    p_uv: np.ndarray,
    q_uv: np.ndarray,
    t1: np.ndarray,
    candidate: np.ndarray,
    intr: CameraIntrinsics,
    t: np.ndarray,
    cfg: ReplayConfig,
) -> np.ndarray:
    """Per-point step budget for the epipolar walk.

    Bounded by the exit of the bilinear domain along the reverse direction
    and by the farthest displacement any occluder at depth >= d_min could
    produce anywhere on the walked segment (the displacement is convex
    along the segment, so its maximum sits at an endpoint).
    """
    n_pts = p_uv.shape[0]
    steps = np.zeros(n_pts, dtype=np.int64)
    ok = candidate & (t1 > _DEGENERATE_T)
    ok &= (
        (p_uv[:, 0] >= 0)
        & (p_uv[:, 0] <= intr.width - 1)
        & (p_uv[:, 1] >= 0)
        & (p_uv[:, 1] <= intr.height - 1)
    )
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return steps
    p = p_uv[idx]
    d = -(q_uv[idx] - p) / t1[idx, None]  # walk direction, unit
    s_max = np.full(idx.size, np.inf)
    for axis, limit in ((0, intr.width - 1.0), (1, intr.height - 1.0)):
        moving = np.abs(d[:, axis]) > 1e-15
        hi = np.where(d[:, axis] > 0, limit, 0.0)
        s_axis = np.where(moving, (hi - p[:, axis]) / np.where(moving, d[:, axis], 1.0), np.inf)
        s_max = np.minimum(s_max, np.maximum(s_axis, 0.0))
    p_end = p + d * s_max[:, None]
    t_bound = np.maximum(
        _displace(p, cfg.d_min, intr, t), _displace(p_end, cfg.d_min, intr, t)
    )
    by_boundary = np.floor(s_max / cfg.dt)
    by_reach = np.floor((t_bound - t1[idx]) / cfg.dt)
    budget = np.minimum(by_boundary, by_reach)
    budget = np.where(np.isfinite(budget), budget, by_boundary)
    steps[idx] = np.maximum(budget, 0.0).astype(np.int64)
    return steps


def is_occluded(
    p_uv,
    depth: float,
    virtual_dense: np.ndarray,
    cfg: ReplayConfig,
    translation,
    intr: CameraIntrinsics,
) -> bool:
    """Single-point occlusion test against a densified virtual depthmap."""
    t = _translation_of(translation)
    p = np.asarray(p_uv, dtype=np.float64).reshape(1, 2)
    if depth <= 0:
        raise ValueError("depth must be positive")
    zz = depth + t[2]
    if zz <= VISIBILITY_EPS:
        return False
    pt = back_project(p, depth, intr)[0] + t
    q = np.array(
        [[intr.fx * pt[0] / pt[2] + intr.cx, intr.fy * pt[1] / pt[2] + intr.cy]]
    )
    t1 = np.hypot(q[0, 0] - p[0, 0], q[0, 1] - p[0, 1])
    t1 = np.array([t1])
    steps = _walk_limits(p, q, t1, np.array([True]), intr, t, cfg)
    flagged, _, _, _, _ = _kernels.epipolar_sweep(
        p,
        q,
        t1,
        steps,
        np.ascontiguousarray(virtual_dense, dtype=np.float64),
        intr.fx,
        intr.fy,
        intr.cx,
        intr.cy,
        t[0],
        t[1],
        t[2],
        cfg.dt,
        cfg.threshold,
        VISIBILITY_EPS,
    )
    return bool(flagged[0])


class _Frame:
    """Shared per-frame state for the detector and the warp baseline."""

    def __init__(self, pts, pose, intr_rgb, cfg, raster_spec, descent_spec):
        self.calib = None
        offset = np.zeros(3)
        if cfg.autocalib:
            self.calib = auto_calibrate(
                pts,
                raster_spec or RasterSpec(),
                descent_spec or DescentSpec(),
            )
            offset = self.calib.origin_offset
        self.offset = offset
        shifted = pts + offset
        self.rotated = shifted @ pose.rotation.T
        self.t_eff = pose.translation - pose.rotation @ offset
        self.intr_rgb = intr_rgb
        self.virtual_intr = make_virtual_camera(intr_rgb, cfg.fov_margin)

        identity = RigidPose.identity()
        self.p_uv, self.d_virtual, vis_l = project(
            self.rotated, identity, self.virtual_intr
        )
        self.px_l = rasterize_px(np.nan_to_num(self.p_uv, nan=-1.0))
        self.in_virtual = vis_l & _in_image(self.px_l, self.virtual_intr)
        self.vis_virtual = vis_l

        pose_t = RigidPose(np.eye(3), self.t_eff)
        self.q_rgb, self.d_rgb, vis_r = project(self.rotated, pose_t, intr_rgb)
        self.px_r = rasterize_px(np.nan_to_num(self.q_rgb, nan=-1.0))
        self.in_rgb = vis_r & _in_image(self.px_r, intr_rgb)
        self.vis_rgb = vis_r

        self.sparse_virtual = None
        self.dense_virtual = None
        self.collisions = 0
        if np.any(self.in_virtual):
            m = self.in_virtual
            self.sparse_virtual, self.collisions = _kernels.scatter_min(
                self.px_l[m, 0],
                self.px_l[m, 1],
                self.d_virtual[m],
                self.virtual_intr.height,
                self.virtual_intr.width,
            )
            self.dense_virtual = densify_nn(self.sparse_virtual)

    def rasterize_rgb(self, idx: np.ndarray) -> np.ndarray:
        if idx.size == 0:
            return np.zeros((self.intr_rgb.height, self.intr_rgb.width))
        out, _ = _kernels.scatter_min(
            self.px_r[idx, 0],
            self.px_r[idx, 1],
            self.d_rgb[idx],
            self.intr_rgb.height,
            self.intr_rgb.width,
        )
        return out


def _in_image(px: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    return (
        (px[:, 0] >= 0)
        & (px[:, 0] < intr.width)
        & (px[:, 1] >= 0)
        & (px[:, 1] < intr.height)
    )


def remove_artifacts(
    cloud,
    pose: RigidPose,
    intr_rgb: CameraIntrinsics,
    cfg: ReplayConfig = ReplayConfig(),
    diagnostics: bool = False,
    raster_spec: Optional[RasterSpec] = None,
    descent_spec: Optional[DescentSpec] = None,
) -> OcclusionResult:
    """Flag epipolar-occluded points and rasterize the cleaned depthmap.

    The result partitions exactly the points visible in the target (RGB)
    view; the cleaned map contains no contribution from a flagged point and
    never relocates or invents a depth value.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    frame = _Frame(pts, pose, intr_rgb, cfg, raster_spec, descent_spec)

    n_pts = pts.shape[0]
    flagged = np.zeros(n_pts, dtype=bool)
    min_g = np.full(n_pts, np.inf)
    occ_u = np.full(n_pts, np.nan)
    occ_v = np.full(n_pts, np.nan)
    hit_step = np.full(n_pts, -1, dtype=np.int64)
    q_uv = np.full((n_pts, 2), np.nan)
    t1 = np.full(n_pts, np.nan)

    if frame.dense_virtual is not None:
        remap = unify_intrinsics(frame.virtual_intr, intr_rgb)
        q_uv = remap.apply(frame.q_rgb)
        diff = q_uv - frame.p_uv
        with np.errstate(invalid="ignore"):
            t1 = np.hypot(diff[:, 0], diff[:, 1])
        candidate = frame.in_rgb & frame.vis_virtual
        steps = _walk_limits(
            np.nan_to_num(frame.p_uv, nan=-1.0),
            np.nan_to_num(q_uv, nan=-1.0),
            np.nan_to_num(t1, nan=0.0),
            candidate,
            frame.virtual_intr,
            frame.t_eff,
            cfg,
        )
        flagged, min_g, occ_u, occ_v, hit_step = _kernels.epipolar_sweep(
            np.nan_to_num(frame.p_uv, nan=-1.0),
            np.nan_to_num(q_uv, nan=-1.0),
            np.where(t1 > _DEGENERATE_T, t1, 1.0),
            steps,
            frame.dense_virtual,
            frame.virtual_intr.fx,
            frame.virtual_intr.fy,
            frame.virtual_intr.cx,
            frame.virtual_intr.cy,
            frame.t_eff[0],
            frame.t_eff[1],
            frame.t_eff[2],
            cfg.dt,
            cfg.threshold,
            VISIBILITY_EPS,
        )

    occluded = np.flatnonzero(frame.in_rgb & flagged)
    kept = np.flatnonzero(frame.in_rgb & ~flagged)
    clean = frame.rasterize_rgb(kept)

    diag = None
    if diagnostics:
        diag = {
            "t": t1,
            "min_g": min_g,
            "p_virtual": frame.p_uv,
            "q_virtual": q_uv,
            "occluder_uv": np.stack([occ_u, occ_v], axis=1),
            "hit_step": hit_step,
            "visible_rgb": frame.in_rgb,
            "origin_offset": frame.offset,
            "translation_effective": frame.t_eff,
            "virtual_intrinsics": frame.virtual_intr,
            "virtual_collisions": frame.collisions,
            "autocalib": frame.calib,
        }
    return OcclusionResult(
        occluded=occluded, kept=kept, clean_depthmap=clean, diagnostics=diag
    )
