"""Projective-artifact removal for LiDAR-projected camera depthmaps."""

from ._kernels import available_backends, backend_name, set_backend
from .autocalib import (
    CalibResult,
    DescentSpec,
    RasterSpec,
    auto_calibrate,
    duplication_loss,
    spherical_map,
)
from .baselines import modified_halfocc, raw_halfocc
from .densify import (
    INVALID_DEPTH,
    densify_nn,
    rasterize_depthmap,
    sample_bilinear,
    valid_mask,
)
from .geometry import (
    CameraIntrinsics,
    PixelPoint,
    PointCloud,
    RigidPose,
    back_project,
    decompose_pose,
    epipolar_direction,
    epipolar_direction_field,
    epipolar_line,
    project,
    project_point,
    unify_intrinsics,
)
from .metrics import (
    ArtifactWidthCurve,
    MetricsReport,
    artifact_width_histogram,
    evaluate,
    evaluate_removed,
)
from .occlusion import (
    OcclusionResult,
    ReplayConfig,
    is_occluded,
    make_virtual_camera,
    occlusion_gap,
    remove_artifacts,
)
from .synth import (
    BeamSpec,
    Box,
    Rect,
    Scene,
    Sphere,
    score_detector,
    simulate_scan,
    street_scene,
    visibility_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactWidthCurve",
    "BeamSpec",
    "Box",
    "CalibResult",
    "CameraIntrinsics",
    "DescentSpec",
    "INVALID_DEPTH",
    "MetricsReport",
    "OcclusionResult",
    "PixelPoint",
    "PointCloud",
    "RasterSpec",
    "Rect",
    "ReplayConfig",
    "RigidPose",
    "Scene",
    "Sphere",
    "artifact_width_histogram",
    "auto_calibrate",
    "available_backends",
    "back_project",
    "backend_name",
    "decompose_pose",
    "densify_nn",
    "duplication_loss",
    "epipolar_direction",
    "epipolar_direction_field",
    "epipolar_line",
    "evaluate",
    "evaluate_removed",
    "is_occluded",
    "make_virtual_camera",
    "modified_halfocc",
    "occlusion_gap",
    "project",
    "project_point",
    "raw_halfocc",
    "rasterize_depthmap",
    "remove_artifacts",
    "sample_bilinear",
    "score_detector",
    "set_backend",
    "simulate_scan",
    "spherical_map",
    "street_scene",
    "unify_intrinsics",
    "valid_mask",
    "visibility_oracle",
]
