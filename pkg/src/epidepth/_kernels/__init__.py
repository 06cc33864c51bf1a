"""Hot-kernel dispatch: numba-accelerated with a pure-numpy fallback.

The backend is chosen at import time from the ``EPIDEPTH_BACKEND``
environment variable (``numba``, ``numpy``, or ``auto``; default auto,
which prefers numba when it is importable).  ``set_backend`` switches at
runtime, which the benchmark uses to compare both paths.
"""

from __future__ import annotations

import os
import warnings

from . import numpy_impl

_BACKENDS = {"numpy": numpy_impl}

try:
    from . import numba_impl

    _BACKENDS["numba"] = numba_impl
except ImportError:  # pragma: no cover - exercised only without numba
    numba_impl = None

_KERNELS = ("scatter_min", "occupancy_count", "bilinear_many", "nn_fill",
            "epipolar_sweep")

_active_name = ""
_active = None


def available_backends():
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> str:
    """Select the kernel backend; returns the name actually activated."""
    global _active, _active_name
    name = name.lower()
    if name == "auto":
        name = "numba" if "numba" in _BACKENDS else "numpy"
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        )
    _active = _BACKENDS[name]
    _active_name = name
    return name


def backend_name() -> str:
    return _active_name


_requested = os.environ.get("EPIDEPTH_BACKEND", "auto").lower()
if _requested == "numba" and "numba" not in _BACKENDS:
    warnings.warn("EPIDEPTH_BACKEND=numba but numba is unavailable; "
                  "falling back to numpy kernels")
    _requested = "numpy"
set_backend(_requested)


def scatter_min(iu, iv, depth, height, width):
    return _active.scatter_min(iu, iv, depth, height, width)


def occupancy_count(codes, n_cells):
    return _active.occupancy_count(codes, n_cells)


def bilinear_many(grid, u, v):
    return _active.bilinear_many(grid, u, v)


def nn_fill(values):
    return _active.nn_fill(values)


def epipolar_sweep(*args):
    return _active.epipolar_sweep(*args)
