"""Point-cloud origin recovery via spherical-raster duplication loss.

A cloud whose points are rays from the true sensor origin occupies one
spherical-raster cell per beam.  A biased origin bends the ray directions
and makes beams collide in the raster; the integer duplication loss
(number of points minus number of occupied cells) is minimized over the
origin offset by cyclic coordinate descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .geometry import as_points

_DEG = np.pi / 180.0


@dataclass(frozen=True)
class RasterSpec:
    """Angular binning of the spherical raster.

    theta is the polar angle from the +y axis in [0, pi]; phi the azimuth
    atan2(z, x) wrapped to [0, 2*pi).  Bin index = floor(angle/step + 0.5);
    phi bins wrap circularly.
    """

    theta_step: float = 0.2 * _DEG
    phi_step: float = 0.2 * _DEG

    def __post_init__(self):
        if not (self.theta_step > 0 and self.phi_step > 0):
            raise ValueError("angular steps must be positive")

    @property
    def n_theta(self) -> int:
        return int(np.floor(np.pi / self.theta_step + 0.5)) + 1

    @property
    def n_phi(self) -> int:
        return max(1, int(np.floor(2.0 * np.pi / self.phi_step + 0.5)))


@dataclass(frozen=True)
class DescentSpec:
    """Coordinate-descent schedule: probe +/- step per axis, accept the best
    improving move, halve the step after a sweep without improvement."""

    initial_step: float = 0.05
    min_step: float = 1e-3
    max_sweeps: int = 100

    def __post_init__(self):
        if not (0 < self.min_step <= self.initial_step):
            raise ValueError("need 0 < min_step <= initial_step")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class CalibResult:
    origin_offset: np.ndarray
    final_loss: int
    iterations: int
    converged: bool
    initial_loss: int
    loss_history: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "offset": [float(x) for x in self.origin_offset],
            "loss": int(self.final_loss),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


def spherical_bins(points, offset, spec: RasterSpec = RasterSpec()):
    """Discrete (theta, phi) bins of points + offset.

    Returns (theta_bin, phi_bin, valid); points landing exactly on the
    shifted origin are degenerate (valid False) and excluded from the loss.
    """
    pts = as_points(points) + np.asarray(offset, dtype=np.float64).reshape(3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    radial = np.hypot(x, z)
    valid = (radial + np.abs(y)) > 0
    theta = np.arctan2(radial, y)
    phi = np.mod(np.arctan2(z, x), 2.0 * np.pi)
    tb = np.floor(theta / spec.theta_step + 0.5).astype(np.int64)
    pb = np.floor(phi / spec.phi_step + 0.5).astype(np.int64) % spec.n_phi
    return tb, pb, valid


def spherical_map(point, offset, spec: RasterSpec = RasterSpec()):
    """Scalar bin lookup; None for a degenerate (at-origin) point."""
    tb, pb, valid = spherical_bins(
        np.asarray(point, dtype=np.float64).reshape(1, 3), offset, spec
    )
    if not valid[0]:
        return None
    return int(tb[0]), int(pb[0])


def duplication_loss(cloud, offset, spec: RasterSpec = RasterSpec()) -> int:
    """Number of points sharing a raster cell with an earlier point.

    Zero exactly when every (non-degenerate) point occupies its own cell.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    tb, pb, valid = spherical_bins(pts, offset, spec)
    codes = tb[valid] * spec.n_phi + pb[valid]
    if codes.size == 0:
        return 0
    occupied = _kernels.occupancy_count(codes, spec.n_theta * spec.n_phi)
    return int(codes.size - occupied)


def auto_calibrate(
    cloud,
    raster_spec: RasterSpec = RasterSpec(),
    descent_spec: DescentSpec = DescentSpec(),
    initial_offset: Optional[np.ndarray] = None,
) -> CalibResult:
    """Recover the origin offset minimizing the duplication loss.

    Deterministic cyclic coordinate descent over (x, y, z).  The accepted
    loss never increases; terminates once the probe step falls below
    ``min_step`` (converged) or after ``max_sweeps`` sweeps.
    """
    pts = as_points(cloud)
    if pts.shape[0] < 100:
        raise ValueError("auto-calibration needs at least 100 points")
    offset = (
        np.zeros(3)
        if initial_offset is None
        else np.asarray(initial_offset, dtype=np.float64).reshape(3).copy()
    )
    best = duplication_loss(pts, offset, raster_spec)
    initial_loss = best
    history = [best]
    step = descent_spec.initial_step
    sweeps = 0
    while step >= descent_spec.min_step and sweeps < descent_spec.max_sweeps:
        improved = False
        for axis in range(3):
            move_loss = best
            move_sign = 0
            for sign in (1.0, -1.0):
                cand = offset.copy()
                cand[axis] += sign * step
                loss = duplication_loss(pts, cand, raster_spec)
                if loss < move_loss:
                    move_loss = loss
                    move_sign = sign
            if move_sign != 0:
                offset[axis] += move_sign * step
                best = move_loss
                history.append(best)
                improved = True
        sweeps += 1
        if not improved:
            step *= 0.5
    return CalibResult(
        origin_offset=offset,
        final_loss=int(best),
        iterations=sweeps,
        converged=step < descent_spec.min_step,
        initial_loss=int(initial_loss),
        loss_history=np.asarray(history, dtype=np.int64),
    )
