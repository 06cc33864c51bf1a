"""Depthmap quality metrics, removed-point assessment, artifact widths.

All metrics run over pixels that are valid in both maps (and inside the
configured depth range of the reference), optionally restricted by a
region mask.  Definitions follow the standard depth-benchmark forms:

  ratio     r = max(pred/gt, gt/pred)
  delta_k   mean(r < 1.25**k)              for k in {0.5, 1, 2, 3}
  RMS       sqrt(mean((pred - gt)^2))
  RMSlog    sqrt(mean((ln pred - ln gt)^2))
  ARel      mean(|pred - gt| / gt)
  SRel      mean((pred - gt)^2 / gt)
  log10     mean(|log10 pred - log10 gt|)
  SIlog     100 * sqrt(mean(l^2) - mean(l)^2),  l = ln pred - ln gt
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .densify import valid_mask
from .geometry import rasterize_px

REGION_BACKGROUND = 0
REGION_FOREGROUND = 1
REGION_IGNORE = 255

_REGIONS = ("all", "fg", "bg", "foreground", "background")

_TABLE_COLUMNS = (
    ("d0.5", "delta_05"),
    ("d1", "delta_1"),
    ("d2", "delta_2"),
    ("d3", "delta_3"),
    ("RMS", "rms"),
    ("RMSlog", "rms_log"),
    ("ARel", "abs_rel"),
    ("SRel", "sq_rel"),
    ("log10", "log10"),
    ("SIlog", "si_log"),
)


@dataclass(frozen=True)
class MetricsReport:
    delta_05: float
    delta_1: float
    delta_2: float
    delta_3: float
    rms: float
    rms_log: float
    abs_rel: float
    sq_rel: float
    log10: float
    si_log: float
    n_pixels: int

    def to_dict(self) -> dict:
        out = {json_key: getattr(self, attr) for json_key, attr in (
            ("delta_0.5", "delta_05"),
            ("delta_1", "delta_1"),
            ("delta_2", "delta_2"),
            ("delta_3", "delta_3"),
            ("rms", "rms"),
            ("rms_log", "rms_log"),
            ("abs_rel", "abs_rel"),
            ("sq_rel", "sq_rel"),
            ("log10", "log10"),
            ("si_log", "si_log"),
        )}
        out["n_pixels"] = int(self.n_pixels)
        return out

    def format_table(self) -> str:
        header = "  ".join(f"{name:>8s}" for name, _ in _TABLE_COLUMNS)
        row = "  ".join(
            f"{getattr(self, attr):8.4f}" for _, attr in _TABLE_COLUMNS
        )
        return f"{header}  {'pixels':>8s}\n{row}  {self.n_pixels:8d}"


def _region_mask(mask: np.ndarray, region: str) -> np.ndarray:
    if region in ("fg", "foreground"):
        return mask == REGION_FOREGROUND
    if region in ("bg", "background"):
        return mask == REGION_BACKGROUND
    return mask != REGION_IGNORE


def evaluate(
    pred: np.ndarray,
    gt: np.ndarray,
    mask: Optional[np.ndarray] = None,
    region: str = "all",
    max_depth: Optional[float] = 80.0,
) -> MetricsReport:
    """Compare a depthmap against a reference over jointly valid pixels.

    ``mask`` labels pixels REGION_FOREGROUND / REGION_BACKGROUND /
    REGION_IGNORE; ``region`` selects which labels count.  Reference pixels
    deeper than ``max_depth`` are excluded (None disables the cap).
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError("shape mismatch between prediction and reference")
    if region not in _REGIONS:
        raise ValueError(f"unknown region {region!r}")
    sel = valid_mask(pred) & valid_mask(gt)
    if max_depth is not None:
        sel &= gt <= max_depth
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != gt.shape:
            raise ValueError("mask shape mismatch")
        sel &= _region_mask(mask, region)
    elif region != "all":
        raise ValueError("region selection requires a mask")

    p = pred[sel]
    g = gt[sel]
    if p.size == 0:
        raise ValueError("empty evaluation")
    ratio = np.maximum(p / g, g / p)
    diff = p - g
    ell = np.log(p) - np.log(g)
    return MetricsReport(
        delta_05=float(np.mean(ratio < 1.25**0.5)),
        delta_1=float(np.mean(ratio < 1.25)),
        delta_2=float(np.mean(ratio < 1.25**2)),
        delta_3=float(np.mean(ratio < 1.25**3)),
        rms=float(np.sqrt(np.mean(diff**2))),
        rms_log=float(np.sqrt(np.mean(ell**2))),
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        log10=float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
        si_log=float(100.0 * np.sqrt(np.mean(ell**2) - np.mean(ell) ** 2)),
        n_pixels=int(p.size),
    )


def evaluate_removed(
    raw: np.ndarray,
    cleaned: np.ndarray,
    gt: np.ndarray,
    mask: Optional[np.ndarray] = None,
    region: str = "all",
    max_depth: Optional[float] = 80.0,
) -> MetricsReport:
    """Metrics of exactly the pixels present in raw but absent in cleaned.

    A good removal algorithm scores badly here: it should have removed the
    wrong depths, not the agreeing ones.
    """
    raw = np.asarray(raw, dtype=np.float64)
    cleaned = np.asarray(cleaned, dtype=np.float64)
    if raw.shape != cleaned.shape:
        raise ValueError("shape mismatch between raw and cleaned")
    if np.any(valid_mask(cleaned) & ~valid_mask(raw)):
        raise ValueError("cleaned map is not a pixelwise subset of raw")
    removed = valid_mask(raw) & ~valid_mask(cleaned)
    if not np.any(removed):
        raise ValueError("nothing removed")
    removed_map = np.where(removed, raw, 0.0)
    return evaluate(removed_map, gt, mask=mask, region=region, max_depth=max_depth)


@dataclass(frozen=True)
class ArtifactWidthCurve:
    """Distribution of removed-run widths along the epipolar direction."""

    widths: np.ndarray
    percentiles: np.ndarray  # width at percentiles 0..100

    @property
    def empty(self) -> bool:
        return self.widths.size == 0


def artifact_width_histogram(
    raw: np.ndarray,
    cleaned: np.ndarray,
    direction_field: np.ndarray,
) -> ArtifactWidthCurve:
    """Score each removed pixel by the length of its removed run.

    Starting from every removed pixel, steps of one pixel are taken along
    +/- the local epipolar direction (rounding to the nearest pixel) for as
    long as the visited pixel is also removed; the run length in pixels is
    the width.  An empty removed set yields an empty curve.
    """
    raw = np.asarray(raw, dtype=np.float64)
    cleaned = np.asarray(cleaned, dtype=np.float64)
    if np.any(valid_mask(cleaned) & ~valid_mask(raw)):
        raise ValueError("cleaned map is not a pixelwise subset of raw")
    removed = valid_mask(raw) & ~valid_mask(cleaned)
    h, w = removed.shape
    field = np.asarray(direction_field, dtype=np.float64)
    if field.shape != (h, w, 2):
        raise ValueError("direction field shape mismatch")
    ys, xs = np.nonzero(removed)
    if ys.size == 0:
        return ArtifactWidthCurve(
            widths=np.empty(0, dtype=np.int64), percentiles=np.empty(0)
        )
    widths = np.empty(ys.size, dtype=np.int64)
    for i in range(ys.size):
        r, c = int(ys[i]), int(xs[i])
        du, dv = field[r, c]
        if not (np.isfinite(du) and np.isfinite(dv)):
            widths[i] = 1
            continue
        count = 1
        for sign in (1.0, -1.0):
            step = 1
            while True:
                px = rasterize_px(np.array([c + sign * du * step,
                                            r + sign * dv * step]))
                cc, rr = int(px[0]), int(px[1])
                if rr < 0 or rr >= h or cc < 0 or cc >= w or not removed[rr, cc]:
                    break
                if rr == r and cc == c:  # direction too shallow to leave the pixel
                    break
                count += 1
                step += 1
        widths[i] = count
    return ArtifactWidthCurve(
        widths=widths,
        percentiles=np.percentile(widths, np.arange(101)),
    )
