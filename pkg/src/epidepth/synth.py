"""Synthetic scenes, LiDAR scan simulation, and an exact visibility oracle.

Scenes hold axis-aligned boxes, spheres, and rectangle patches with exact
ray intersections.  ``simulate_scan`` casts a beam grid and keeps first
hits; ``visibility_oracle`` labels each scanned point occluded from a
second viewpoint exactly (a surface blocks the open segment from that
viewpoint to the point).  Scene documents are plain JSON so tests and the
CLI stay data-driven.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import CameraIntrinsics, PointCloud, RigidPose, as_points

_DEG = np.pi / 180.0


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if not np.all(hi > lo):
            raise ValueError("box must have positive extent")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def intersect(self, origins, dirs):
        """Slab test; entry distance, or exit when starting inside."""
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t0 = (self.lo[None, :] - origins) * inv
            t1 = (self.hi[None, :] - origins) * inv
        # parallel rays: +/- inf slabs; a parallel ray outside the slab misses
        lo_t = np.minimum(t0, t1)
        hi_t = np.maximum(t0, t1)
        parallel = dirs == 0.0
        inside = (origins >= self.lo[None, :]) & (origins <= self.hi[None, :])
        lo_t = np.where(parallel, np.where(inside, -np.inf, np.inf), lo_t)
        hi_t = np.where(parallel, np.where(inside, np.inf, -np.inf), hi_t)
        t_near = lo_t.max(axis=1)
        t_far = hi_t.min(axis=1)
        hit = t_near <= t_far
        t = np.where(t_near >= 0.0, t_near, t_far)
        return np.where(hit & (t >= 0.0), t, np.inf)


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(
            self, "center", np.asarray(self.center, dtype=np.float64).reshape(3)
        )

    def intersect(self, origins, dirs):
        oc = origins - self.center[None, :]
        b = np.einsum("ij,ij->i", oc, dirs)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius**2
        disc = b * b - c
        hit = disc >= 0.0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t_near = -b - sq
        t_far = -b + sq
        t = np.where(t_near >= 0.0, t_near, t_far)
        return np.where(hit & (t >= 0.0), t, np.inf)


@dataclass(frozen=True)
class Rect:
    """Planar rectangle: center plus two orthogonal in-plane half axes."""

    center: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    half_u: float
    half_v: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        u = np.asarray(self.u_axis, dtype=np.float64).reshape(3)
        v = np.asarray(self.v_axis, dtype=np.float64).reshape(3)
        if not (self.half_u > 0 and self.half_v > 0):
            raise ValueError("rectangle half extents must be positive")
        un = np.linalg.norm(u)
        vn = np.linalg.norm(v)
        if un == 0 or vn == 0:
            raise ValueError("rectangle axes must be nonzero")
        u = u / un
        v = v / vn
        if abs(float(u @ v)) > 1e-9:
            raise ValueError("rectangle axes must be orthogonal")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "u_axis", u)
        object.__setattr__(self, "v_axis", v)
        object.__setattr__(self, "normal", np.cross(u, v))

    def intersect(self, origins, dirs):
        n = self.normal
        denom = dirs @ n
        num = (self.center[None, :] - origins) @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        hit = (np.abs(denom) > 1e-15) & (t >= 0.0) & np.isfinite(t)
        pts = origins + dirs * t[:, None]
        rel = pts - self.center[None, :]
        in_u = np.abs(rel @ self.u_axis) <= self.half_u
        in_v = np.abs(rel @ self.v_axis) <= self.half_v
        return np.where(hit & in_u & in_v, t, np.inf)


@dataclass(frozen=True)
class Scene:
    primitives: tuple

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if len(self.primitives) == 0:
            raise ValueError("scene must contain at least one primitive")

    def first_hit(self, origins, dirs, t_min: float = 0.0):
        """Distance of the nearest intersection at t >= t_min; inf = miss."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        best = np.full(origins.shape[0], np.inf)
        for prim in self.primitives:
            t = prim.intersect(origins, dirs)
            t = np.where(t >= t_min, t, np.inf)
            best = np.minimum(best, t)
        return best


@dataclass(frozen=True)
class BeamSpec:
    """Angular beam grid: azimuth around +y (x-z plane, 0 at +z, positive
    toward +x), elevation from the x-z plane (positive up, i.e. toward -y)."""

    azimuth_start: float
    azimuth_stop: float
    azimuth_step: float
    elevation_start: float
    elevation_stop: float
    elevation_step: float

    def __post_init__(self):
        if self.azimuth_step <= 0 or self.elevation_step <= 0:
            raise ValueError("beam steps must be positive")

    def angles(self):
        az_n = int(np.floor((self.azimuth_stop - self.azimuth_start)
                            / self.azimuth_step + 0.5)) + 1
        el_n = int(np.floor((self.elevation_stop - self.elevation_start)
                            / self.elevation_step + 0.5)) + 1
        if az_n < 1 or el_n < 1:
            raise ValueError("empty beam grid")
        az = self.azimuth_start + self.azimuth_step * np.arange(az_n)
        el = self.elevation_start + self.elevation_step * np.arange(el_n)
        return az, el


def beam_directions(spec: BeamSpec) -> np.ndarray:
    az, el = spec.angles()
    azg, elg = np.meshgrid(az, el)
    azg = azg.ravel()
    elg = elg.ravel()
    return np.stack(
        [
            np.cos(elg) * np.sin(azg),
            -np.sin(elg),
            np.cos(elg) * np.cos(azg),
        ],
        axis=1,
    )


def simulate_scan(
    scene: Scene,
    lidar_origin,
    beam_spec: BeamSpec,
    t_min: float = 1e-6,
) -> PointCloud:
    """First-hit ray casting over the beam grid; misses are omitted.

    Returned points are relative to the sensor origin, so they are rays
    from the coordinate origin by construction.
    """
    origin = np.asarray(lidar_origin, dtype=np.float64).reshape(3)
    dirs = beam_directions(beam_spec)
    origins = np.broadcast_to(origin, dirs.shape)
    t = scene.first_hit(origins, dirs, t_min=t_min)
    hit = np.isfinite(t)
    return PointCloud(points=dirs[hit] * t[hit, None])


def visibility_oracle(
    cloud,
    scene: Scene,
    rgb_origin,
    tol: float = 1e-6,
    lidar_origin=(0.0, 0.0, 0.0),
    return_blockers: bool = False,
):
    """Exact per-point occlusion labels from a second viewpoint.

    A point is occluded exactly when some scene surface intersects the open
    segment from ``rgb_origin`` to the point at a distance smaller than
    (range - tol); the tolerance ignores the point's own surface.  With
    ``return_blockers`` the world-frame blocking points are also returned
    (NaN rows for visible points).
    """
    pts = as_points(cloud) + np.asarray(lidar_origin, dtype=np.float64).reshape(3)
    origin = np.asarray(rgb_origin, dtype=np.float64).reshape(3)
    delta = pts - origin[None, :]
    rng = np.linalg.norm(delta, axis=1)
    ok = rng > 0
    dirs = np.where(ok[:, None], delta / np.where(ok, rng, 1.0)[:, None], 0.0)
    origins = np.broadcast_to(origin, dirs.shape)
    t = scene.first_hit(origins, dirs, t_min=0.0)
    occluded = ok & (t < rng - tol)
    if not return_blockers:
        return occluded
    blockers = np.full_like(pts, np.nan)
    blockers[occluded] = origin[None, :] + dirs[occluded] * t[occluded, None]
    return occluded, blockers


def score_detector(result, labels: np.ndarray):
    """Precision/recall of flagged points against oracle labels.

    Restricted to the points the detector partitioned (those visible in
    the target-view frustum).  Either score is None when its denominator
    is empty.
    """
    labels = np.asarray(labels, dtype=bool)
    universe = np.concatenate([result.occluded, result.kept])
    flagged = np.zeros(labels.shape[0], dtype=bool)
    flagged[result.occluded] = True
    in_universe = np.zeros(labels.shape[0], dtype=bool)
    in_universe[universe] = True
    tp = int(np.sum(flagged & labels & in_universe))
    fp = int(np.sum(flagged & ~labels & in_universe))
    fn = int(np.sum(~flagged & labels & in_universe))
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    return precision, recall


# ---------------------------------------------------------------------------
# Scene documents

class SceneFormatError(ValueError):
    """Scene document violation; ``pointer`` is the offending JSON pointer."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


def _need(doc: dict, key: str, ptr: str):
    if key not in doc:
        raise SceneFormatError(f"{ptr}/{key}", "missing required field")
    return doc[key]


def _vec3(value, ptr: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64).reshape(3)
    except (TypeError, ValueError):
        raise SceneFormatError(ptr, "expected a 3-vector of numbers") from None
    if not np.all(np.isfinite(arr)):
        raise SceneFormatError(ptr, "expected finite numbers")
    return arr


def _number(value, ptr: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SceneFormatError(ptr, "expected a number")
    return float(value)


def parse_scene(doc: dict):
    """Validate a scene document; errors carry a JSON pointer.

    Returns (scene, lidar_origin, rgb_pose, rgb_intrinsics, beam_spec).
    """
    if not isinstance(doc, dict):
        raise SceneFormatError("", "document must be a JSON object")
    prims_doc = _need(doc, "primitives", "")
    if not isinstance(prims_doc, list) or not prims_doc:
        raise SceneFormatError("/primitives", "expected a non-empty array")
    prims = []
    for i, p in enumerate(prims_doc):
        ptr = f"/primitives/{i}"
        if not isinstance(p, dict):
            raise SceneFormatError(ptr, "expected an object")
        kind = _need(p, "type", ptr)
        try:
            if kind == "box":
                prims.append(
                    Box(_vec3(_need(p, "min", ptr), f"{ptr}/min"),
                        _vec3(_need(p, "max", ptr), f"{ptr}/max"))
                )
            elif kind == "sphere":
                prims.append(
                    Sphere(_vec3(_need(p, "center", ptr), f"{ptr}/center"),
                           _number(_need(p, "radius", ptr), f"{ptr}/radius"))
                )
            elif kind == "rect":
                prims.append(
                    Rect(
                        _vec3(_need(p, "center", ptr), f"{ptr}/center"),
                        _vec3(_need(p, "u_axis", ptr), f"{ptr}/u_axis"),
                        _vec3(_need(p, "v_axis", ptr), f"{ptr}/v_axis"),
                        _number(_need(p, "half_u", ptr), f"{ptr}/half_u"),
                        _number(_need(p, "half_v", ptr), f"{ptr}/half_v"),
                    )
                )
            else:
                raise SceneFormatError(f"{ptr}/type", f"unknown primitive {kind!r}")
        except SceneFormatError:
            raise
        except ValueError as exc:
            raise SceneFormatError(ptr, str(exc)) from None

    lidar_doc = _need(doc, "lidar", "")
    lidar_origin = _vec3(_need(lidar_doc, "origin", "/lidar"), "/lidar/origin")

    rgb_doc = _need(doc, "rgb", "")
    rgb_origin = _vec3(_need(rgb_doc, "origin", "/rgb"), "/rgb/origin")
    rotation = np.eye(3)
    if "rotation" in rgb_doc:
        try:
            rotation = np.asarray(rgb_doc["rotation"], dtype=np.float64).reshape(3, 3)
        except (TypeError, ValueError):
            raise SceneFormatError("/rgb/rotation", "expected 9 numbers") from None
    intr_doc = _need(rgb_doc, "intrinsics", "/rgb")
    try:
        intr = CameraIntrinsics(
            fx=_number(_need(intr_doc, "fx", "/rgb/intrinsics"), "/rgb/intrinsics/fx"),
            fy=_number(_need(intr_doc, "fy", "/rgb/intrinsics"), "/rgb/intrinsics/fy"),
            cx=_number(_need(intr_doc, "cx", "/rgb/intrinsics"), "/rgb/intrinsics/cx"),
            cy=_number(_need(intr_doc, "cy", "/rgb/intrinsics"), "/rgb/intrinsics/cy"),
            width=int(_number(_need(intr_doc, "width", "/rgb/intrinsics"),
                              "/rgb/intrinsics/width")),
            height=int(_number(_need(intr_doc, "height", "/rgb/intrinsics"),
                               "/rgb/intrinsics/height")),
        )
    except ValueError as exc:
        raise SceneFormatError("/rgb/intrinsics", str(exc)) from None

    beams_doc = _need(doc, "beams", "")
    def beam_field(key):
        return _number(_need(beams_doc, key, "/beams"), f"/beams/{key}") * _DEG
    try:
        beams = BeamSpec(
            azimuth_start=beam_field("azimuth_start_deg"),
            azimuth_stop=beam_field("azimuth_stop_deg"),
            azimuth_step=beam_field("azimuth_step_deg"),
            elevation_start=beam_field("elevation_start_deg"),
            elevation_stop=beam_field("elevation_stop_deg"),
            elevation_step=beam_field("elevation_step_deg"),
        )
    except ValueError as exc:
        raise SceneFormatError("/beams", str(exc)) from None

    try:
        scene = Scene(primitives=tuple(prims))
    except ValueError as exc:
        raise SceneFormatError("/primitives", str(exc)) from None
    # camera looks at the world from rgb_origin: x_cam = R (x_world - origin)
    pose = RigidPose(rotation, -(rotation @ (rgb_origin - lidar_origin)))
    return scene, lidar_origin, pose, intr, beams


def load_scene(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return parse_scene(doc)


def street_scene(
    rng: np.random.Generator,
    baseline: float = 0.4,
    n_boxes: Optional[int] = None,
    fx: float = 300.0,
    width: int = 520,
    height: int = 160,
    beam_step_deg: float = 0.2,
) -> dict:
    """Randomized street-like scene document: ground plane, far wall, and a
    few boxes in front of a displaced camera.  Sensor frame: y down."""
    ground_y = 1.7
    wall_z = float(rng.uniform(35.0, 55.0))
    if n_boxes is None:
        n_boxes = int(rng.integers(2, 5))
    prims = [
        {
            "type": "rect",  # ground
            "center": [0.0, ground_y, 35.0],
            "u_axis": [1.0, 0.0, 0.0],
            "v_axis": [0.0, 0.0, 1.0],
            "half_u": 60.0,
            "half_v": 34.9,
        },
        {
            "type": "rect",  # far wall
            "center": [0.0, ground_y - 10.0, wall_z],
            "u_axis": [1.0, 0.0, 0.0],
            "v_axis": [0.0, 1.0, 0.0],
            "half_u": 60.0,
            "half_v": 11.8,
        },
    ]
    for _ in range(n_boxes):
        sx = float(rng.uniform(0.8, 2.4))
        sy = float(rng.uniform(1.0, 2.2))
        sz = float(rng.uniform(0.5, 1.8))
        cx_box = float(rng.uniform(-4.5, 4.5))
        z0 = float(rng.uniform(2.5, 7.0))
        prims.append(
            {
                "type": "box",
                "min": [cx_box - sx / 2, ground_y - sy, z0],
                "max": [cx_box + sx / 2, ground_y, z0 + sz],
            }
        )
    # dominant horizontal baseline with small vertical/forward components
    direction = np.array(
        [1.0, float(rng.uniform(-0.3, 0.3)), float(rng.uniform(-0.05, 0.05))]
    )
    direction /= np.linalg.norm(direction)
    rgb_origin = (baseline * direction).tolist()
    # beam grid covers the widened virtual frustum, aligned to raster centers
    margin = 1.3
    az_half = np.degrees(np.arctan((width * margin / 2) / fx))
    el_half = np.degrees(np.arctan((height * margin / 2) / fx))
    az_half = np.ceil(az_half / beam_step_deg) * beam_step_deg
    el_half = np.ceil(el_half / beam_step_deg) * beam_step_deg
    return {
        "schema_version": 1,
        "primitives": prims,
        "lidar": {"origin": [0.0, 0.0, 0.0]},
        "rgb": {
            "origin": rgb_origin,
            "intrinsics": {
                "fx": fx,
                "fy": fx,
                "cx": (width - 1) / 2.0,
                "cy": (height - 1) / 2.0,
                "width": width,
                "height": height,
            },
        },
        "beams": {
            "azimuth_start_deg": -az_half,
            "azimuth_stop_deg": az_half,
            "azimuth_step_deg": beam_step_deg,
            "elevation_start_deg": -el_half,
            "elevation_stop_deg": el_half,
            "elevation_step_deg": beam_step_deg,
        },
    }
