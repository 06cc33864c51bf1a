"""Benchmark the numba kernels against the pure-numpy fallback.

Run as ``python -m epidepth.bench``.  Times the four hot kernels on
realistic workloads and the full pipeline on a synthetic street frame,
once per available backend.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels
from .autocalib import duplication_loss
from .densify import densify_nn, rasterize_depthmap
from .geometry import CameraIntrinsics, RigidPose
from .occlusion import ReplayConfig, remove_artifacts
from .synth import parse_scene, simulate_scan, street_scene


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _workloads():
    rng = np.random.default_rng(7)
    intr = CameraIntrinsics(fx=721.5, fy=721.5, cx=609.6, cy=172.9,
                            width=1242, height=375)
    pose = RigidPose.identity()
    n = 120_000
    dirs = rng.normal(size=(n, 3))
    dirs[:, 2] = np.abs(dirs[:, 2]) + 0.5
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    cloud = dirs * rng.uniform(2.0, 70.0, size=(n, 1))

    doc = street_scene(rng, baseline=0.4)
    scene, lidar_origin, scene_pose, scene_intr, beams = parse_scene(doc)
    scan = simulate_scan(scene, lidar_origin, beams)
    cfg = ReplayConfig(autocalib=False, d_min=2.0)

    sparse = rasterize_depthmap(cloud, pose, intr)

    return [
        ("rasterize 120k -> 375x1242",
         lambda: rasterize_depthmap(cloud, pose, intr)),
        ("densify 375x1242", lambda: densify_nn(sparse)),
        ("autocalib loss 120k",
         lambda: duplication_loss(cloud, np.array([0.01, 0.0, 0.02]))),
        (f"remove_artifacts street scene ({len(scan)} pts)",
         lambda: remove_artifacts(scan, scene_pose, scene_intr, cfg)),
    ]


def main() -> int:
    backends = _kernels.available_backends()
    results = {}
    workloads = _workloads()
    for backend in backends:
        _kernels.set_backend(backend)
        for name, fn in workloads:
            fn()  # warm-up (JIT compile on the numba path)
            results[(backend, name)] = _time(fn)
    _kernels.set_backend("auto")

    width = max(len(name) for _, name in workloads)
    header = f"{'workload':<{width}}  " + "  ".join(f"{b:>10}" for b in backends)
    print(header)
    print("-" * len(header))
    for name, _ in workloads:
        row = f"{name:<{width}}  "
        row += "  ".join(f"{results[(b, name)]*1e3:9.1f}ms" for b in backends)
        if "numba" in backends and "numpy" in backends:
            speedup = results[("numpy", name)] / results[("numba", name)]
            row += f"  ({speedup:5.1f}x)"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
