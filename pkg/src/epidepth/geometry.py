"""Camera models, rigid poses, and epipolar-geometry primitives.

Conventions used throughout the package:

* Pixel coordinates ``(u, v)`` are continuous, measured at pixel centers,
  origin at the top-left corner; ``u`` grows rightward, ``v`` downward.
* Rasterization maps a continuous coordinate ``x`` to the integer pixel
  ``floor(x + 0.5)`` (round half up).
* Camera frame: x right, y down, z forward along the optical axis.
  Depth is the camera-frame z coordinate, in meters.
* A point is visible to a camera only if its depth exceeds
  ``VISIBILITY_EPS`` (avoids division blow-up at the camera plane).
* All angles are radians, all lengths meters, all image quantities pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

VISIBILITY_EPS = 1e-6
ROTATION_TOL = 1e-9


class PixelPoint(NamedTuple):
    u: float
    v: float
    depth: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def is_rotation_matrix(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True if R is orthonormal with determinant +1 within tol."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    err = np.abs(R.T @ R - np.eye(3)).max()
    return err < tol and abs(np.linalg.det(R) - 1.0) < tol


def nearest_rotation(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) via SVD."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=np.float64))
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal lengths, principal point, image size (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class RigidPose:
    """Rigid transform x_out = rotation @ x_in + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not is_rotation_matrix(R):
            raise ValueError("rotation is not orthonormal with det +1")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", _freeze(R))
        object.__setattr__(self, "translation", _freeze(t))

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def compose(self, other: "RigidPose") -> "RigidPose":
        """Transform applying ``other`` first, then ``self``."""
        return RigidPose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidPose":
        return RigidPose(self.rotation.T, -(self.rotation.T @ self.translation))

    def as_matrix(self) -> np.ndarray:
        """3x4 matrix [R | t]."""
        return np.hstack([self.rotation, self.translation[:, None]])


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3D points in the sensor frame, with an optional scalar payload."""

    points: np.ndarray
    payload: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (N, 3)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", _freeze(pts))
        if self.payload is not None:
            pay = np.asarray(self.payload, dtype=np.float64).reshape(-1)
            if pay.shape[0] != pts.shape[0]:
                raise ValueError("payload length must match point count")
            object.__setattr__(self, "payload", _freeze(pay))

    def __len__(self) -> int:
        return self.points.shape[0]


def as_points(cloud) -> np.ndarray:
    """Accept a PointCloud or a raw (N, 3) array."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("expected PointCloud or (N, 3) array")
    return pts


def project(points: np.ndarray, pose: RigidPose, intr: CameraIntrinsics):
    """Project points through a pose into continuous pixel coordinates.

    Returns ``(uv, depth, visible)`` where uv is (N, 2), depth (N,) is the
    camera-frame z and visible marks depth > VISIBILITY_EPS.  uv rows of
    non-visible points are NaN.  No bounds clipping happens here.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    cam = pts @ pose.rotation.T + pose.translation
    z = cam[:, 2]
    visible = z > VISIBILITY_EPS
    safe_z = np.where(visible, z, 1.0)
    uv = np.empty((pts.shape[0], 2))
    uv[:, 0] = np.where(visible, intr.fx * cam[:, 0] / safe_z + intr.cx, np.nan)
    uv[:, 1] = np.where(visible, intr.fy * cam[:, 1] / safe_z + intr.cy, np.nan)
    if single:
        return uv[0], z[0], visible[0]
    return uv, z, visible


def project_point(
    point: np.ndarray, pose: RigidPose, intr: CameraIntrinsics
) -> Optional[PixelPoint]:
    """Scalar convenience wrapper; None when the point is behind the camera."""
    uv, depth, visible = project(np.asarray(point, dtype=np.float64), pose, intr)
    if not visible:
        return None
    return PixelPoint(float(uv[0]), float(uv[1]), float(depth))


def back_project(uv: np.ndarray, depth, intr: CameraIntrinsics) -> np.ndarray:
    """Invert the pinhole projection for known depth."""
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    depth = np.broadcast_to(np.asarray(depth, dtype=np.float64), uv.shape[:1])
    out = np.empty((uv.shape[0], 3))
    out[:, 0] = (uv[:, 0] - intr.cx) * depth / intr.fx
    out[:, 1] = (uv[:, 1] - intr.cy) * depth / intr.fy
    out[:, 2] = depth
    return out


def rasterize_px(uv: np.ndarray) -> np.ndarray:
    """Continuous pixel coordinates to integer pixels, round half up."""
    return np.floor(np.asarray(uv, dtype=np.float64) + 0.5).astype(np.int64)


def decompose_pose(pose: RigidPose) -> tuple[RigidPose, RigidPose]:
    """Split [R | t] into pure rotation [R | 0] and pure translation [I | t].

    Composing translation_only after rotation_only reproduces the pose.
    """
    rotation_only = RigidPose(pose.rotation, np.zeros(3))
    translation_only = RigidPose(np.eye(3), pose.translation)
    return rotation_only, translation_only


def epipolar_direction(p_uv, q_uv, eps: float = 1e-12):
    """Unit direction from pixel p toward its translated image q.

    Returns ``(n, t)`` with t = |q - p|, or None when the displacement is
    degenerate (point on the epipole ray, or zero baseline); callers treat
    degenerate points as never occluded.
    """
    p = np.asarray(p_uv, dtype=np.float64)[:2]
    q = np.asarray(q_uv, dtype=np.float64)[:2]
    d = q - p
    t = float(np.hypot(d[0], d[1]))
    if t <= eps:
        return None
    return d / t, t


def epipolar_directions(p_uv: np.ndarray, q_uv: np.ndarray, eps: float = 1e-12):
    """Vectorized epipolar_direction: (n, t, ok) with ok False on degeneracy."""
    p = np.asarray(p_uv, dtype=np.float64)
    q = np.asarray(q_uv, dtype=np.float64)
    d = q - p
    t = np.hypot(d[:, 0], d[:, 1])
    ok = t > eps
    n = np.zeros_like(d)
    safe = np.where(ok, t, 1.0)
    n[:, 0] = d[:, 0] / safe
    n[:, 1] = d[:, 1] / safe
    return n, t, ok


def skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def epipolar_line(
    p_uv,
    pose: RigidPose,
    intr_l: CameraIntrinsics,
    intr_r: CameraIntrinsics,
) -> np.ndarray:
    """Epipolar line of left pixel p in the right image (homogeneous 3-vector).

    Raises ValueError for a zero baseline (no epipolar constraint).
    """
    t = pose.translation
    if float(np.linalg.norm(t)) == 0.0:
        raise ValueError("zero translation: no epipolar constraint")
    p = np.asarray(p_uv, dtype=np.float64)[:2]
    ph = np.array([p[0], p[1], 1.0])
    F = intr_r.K_inv.T @ skew(t) @ pose.rotation @ intr_l.K_inv
    return F @ ph


def point_line_distance(uv, line: np.ndarray) -> float:
    """Pixel distance from a point to a homogeneous 2D line."""
    p = np.asarray(uv, dtype=np.float64)[:2]
    norm = float(np.hypot(line[0], line[1]))
    if norm == 0.0:
        raise ValueError("degenerate line")
    return float(abs(line[0] * p[0] + line[1] * p[1] + line[2]) / norm)


@dataclass(frozen=True)
class AffineRemap:
    """Axis-aligned 2D affine map uv -> uv * scale + offset."""

    scale: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scale", _freeze(np.asarray(self.scale).reshape(2)))
        object.__setattr__(self, "offset", _freeze(np.asarray(self.offset).reshape(2)))

    def apply(self, uv: np.ndarray) -> np.ndarray:
        return np.asarray(uv, dtype=np.float64) * self.scale + self.offset

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.scale[0], 0.0, self.offset[0]],
                [0.0, self.scale[1], self.offset[1]],
                [0.0, 0.0, 1.0],
            ]
        )


def unify_intrinsics(
    intr_l: CameraIntrinsics, intr_r: CameraIntrinsics
) -> AffineRemap:
    """Affine map transporting right-camera pixels into left-camera convention.

    Equals K_l @ K_r^-1 restricted to its axis-aligned affine action; identity
    when the intrinsics match.
    """
    su = intr_l.fx / intr_r.fx
    sv = intr_l.fy / intr_r.fy
    return AffineRemap(
        scale=np.array([su, sv]),
        offset=np.array([intr_l.cx - su * intr_r.cx, intr_l.cy - sv * intr_r.cy]),
    )


def epipolar_direction_field(
    intr: CameraIntrinsics, translation: np.ndarray
) -> np.ndarray:
    """Per-pixel unit epipolar direction under a pure translation.

    The direction of pixel motion q - p is a positive multiple of
    (fx*tx - (u-cx)*tz, fy*ty - (v-cy)*tz) for any visible depth, so the
    field is depth independent.  Rows where the direction vanishes (pixel at
    the epipole) are NaN.  Shape (height, width, 2).
    """
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    du = intr.fx * t[0] - (u - intr.cx) * t[2]
    dv = intr.fy * t[1] - (v - intr.cy) * t[2]
    field = np.empty((intr.height, intr.width, 2))
    field[:, :, 0] = du[None, :]
    field[:, :, 1] = dv[:, None] * np.ones_like(du)[None, :]
    norm = np.hypot(field[:, :, 0], field[:, :, 1])
    degenerate = norm <= 1e-15
    norm = np.where(degenerate, 1.0, norm)
    field /= norm[:, :, None]
    field[degenerate] = np.nan
    return field
