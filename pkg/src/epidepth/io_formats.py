"""Bit-exact readers and writers for cloud, calibration, and depth files.

* Point clouds: packed little-endian float32 quadruplets (x, y, z,
  reflectance), the common raw LiDAR dump layout.
* Calibration: line-oriented ``key: values`` text with a 3x3 row-major
  rotation ``R``, translation ``T``, intrinsics ``K`` (9 values) or ``P``
  (12 values, left 3x3 used), and ``size: width height``.
* Depthmaps: 16-bit single-channel PNG, stored value = round(depth * 256),
  0 = invalid.  Removal masks: 8-bit PNG, 255 = removed.
"""

from __future__ import annotations

import logging
import os

import cv2
import numpy as np

from .geometry import (
    CameraIntrinsics,
    PointCloud,
    RigidPose,
    is_rotation_matrix,
    nearest_rotation,
)

log = logging.getLogger(__name__)

DEPTH_PNG_SCALE = 256.0
_RECORD_BYTES = 16


class CalibFormatError(ValueError):
    pass


def read_velodyne_bin(path) -> tuple[PointCloud, int]:
    """Read float32 (x, y, z, reflectance) records.

    Returns (cloud, dropped) where dropped counts records discarded for
    NaN coordinates.  A trailing partial record is an error.
    """
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % _RECORD_BYTES != 0:
        raise ValueError(
            f"{path}: truncated file, {raw.size} bytes is not a multiple of "
            f"{_RECORD_BYTES} (offset of partial record: "
            f"{raw.size - raw.size % _RECORD_BYTES})"
        )
    data = raw.view(np.float32).reshape(-1, 4)
    good = np.all(np.isfinite(data[:, :3]), axis=1)
    dropped = int(data.shape[0] - np.count_nonzero(good))
    if dropped:
        log.warning("%s: dropped %d points with non-finite coordinates",
                    path, dropped)
    data = data[good]
    return (
        PointCloud(
            points=data[:, :3].astype(np.float64),
            payload=data[:, 3].astype(np.float64),
        ),
        dropped,
    )


def write_velodyne_bin(path, cloud: PointCloud) -> None:
    pts = cloud.points.astype(np.float32)
    payload = (
        cloud.payload.astype(np.float32)
        if cloud.payload is not None
        else np.zeros(pts.shape[0], dtype=np.float32)
    )
    np.hstack([pts, payload[:, None]]).astype(np.float32).tofile(path)


def read_calib(path) -> tuple[RigidPose, CameraIntrinsics]:
    """Parse a calibration text file into (sensor-to-camera pose, intrinsics).

    The rotation is validated to be orthonormal within 1e-4 and then snapped
    to the nearest exact rotation; anything worse is rejected.
    """
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise CalibFormatError(f"{path}:{lineno}: expected 'key: values'")
            key, value = line.split(":", 1)
            try:
                entries[key.strip()] = [float(x) for x in value.split()]
            except ValueError:
                raise CalibFormatError(
                    f"{path}:{lineno}: malformed float in {key.strip()!r}"
                ) from None

    def need(key, count):
        if key not in entries:
            raise CalibFormatError(f"{path}: missing required key {key!r}")
        vals = entries[key]
        if len(vals) != count:
            raise CalibFormatError(
                f"{path}: key {key!r} expects {count} values, got {len(vals)}"
            )
        return np.asarray(vals, dtype=np.float64)

    R = need("R", 9).reshape(3, 3)
    t = need("T", 3)
    if "K" in entries:
        K = need("K", 9).reshape(3, 3)
    elif "P" in entries:
        K = need("P", 12).reshape(3, 4)[:, :3]
    else:
        raise CalibFormatError(f"{path}: missing required key 'K' (or 'P')")
    size = need("size", 2)

    if not is_rotation_matrix(R, tol=1e-4):
        raise CalibFormatError(
            f"{path}: R is not a rotation matrix within tolerance 1e-4"
        )
    pose = RigidPose(nearest_rotation(R), t)
    intr = CameraIntrinsics(
        fx=float(K[0, 0]),
        fy=float(K[1, 1]),
        cx=float(K[0, 2]),
        cy=float(K[1, 2]),
        width=int(size[0]),
        height=int(size[1]),
    )
    return pose, intr


def write_calib(path, pose: RigidPose, intr: CameraIntrinsics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("R: " + " ".join(f"{x:.17g}" for x in pose.rotation.ravel()) + "\n")
        fh.write("T: " + " ".join(f"{x:.17g}" for x in pose.translation) + "\n")
        fh.write("K: " + " ".join(f"{x:.17g}" for x in intr.K.ravel()) + "\n")
        fh.write(f"size: {intr.width} {intr.height}\n")


def write_depth_png(depthmap: np.ndarray, path) -> None:
    """16-bit PNG at 1/256 m quantization; invalid pixels store 0."""
    depth = np.asarray(depthmap, dtype=np.float64)
    valid = depth > 0
    if np.any(depth[valid] >= 65536 / DEPTH_PNG_SCALE):
        raise ValueError("depth >= 256 m cannot be stored in a 16-bit depth PNG")
    stored = np.zeros(depth.shape, dtype=np.uint16)
    stored[valid] = np.round(depth[valid] * DEPTH_PNG_SCALE).astype(np.uint16)
    if not cv2.imwrite(os.fspath(path), stored):
        raise IOError(f"failed to write {path}")


def read_depth_png(path) -> np.ndarray:
    img = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"failed to read {path}")
    if img.dtype != np.uint16 or img.ndim != 2:
        raise ValueError(f"{path}: expected a 16-bit single-channel depth PNG")
    return img.astype(np.float64) / DEPTH_PNG_SCALE


def write_mask_png(mask: np.ndarray, path) -> None:
    """8-bit PNG, 255 marks removed pixels."""
    out = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    if not cv2.imwrite(os.fspath(path), out):
        raise IOError(f"failed to write {path}")


def read_mask_png(path) -> np.ndarray:
    img = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"failed to read {path}")
    if img.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel mask PNG")
    return img > 0
