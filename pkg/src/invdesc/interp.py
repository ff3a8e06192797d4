"""Bilinear sampling and resampling of 2-D rasters.

Sampling at integer coordinates reproduces the source values exactly, so
integer translations reduce to index shifts.
"""

from __future__ import annotations

import numpy as np

__all__ = ["bilinear_sample", "resample"]


def bilinear_sample(values: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample ``values`` at fractional ``(row, col)`` locations.

    Locations are clamped to the valid rectangle ``[0, h-1] x [0, w-1]``;
    callers that need strict bounds enforce them beforehand.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    rows = np.clip(np.asarray(rows, dtype=np.float64), 0.0, float(h - 1))
    cols = np.clip(np.asarray(cols, dtype=np.float64), 0.0, float(w - 1))
    r0 = np.minimum(np.floor(rows).astype(np.intp), h - 2) if h > 1 else np.zeros_like(rows, dtype=np.intp)
    c0 = np.minimum(np.floor(cols).astype(np.intp), w - 2) if w > 1 else np.zeros_like(cols, dtype=np.intp)
    fr = rows - r0
    fc = cols - c0
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    top = values[r0, c0] * (1.0 - fc) + values[r0, c1] * fc
    bot = values[r1, c0] * (1.0 - fc) + values[r1, c1] * fc
    return top * (1.0 - fr) + bot * fr


def resample(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample a raster to a new shape, aligning pixel centers.

    Output pixel ``(r, c)`` is sampled at source location
    ``((r + 0.5) * h / out_h - 0.5, (c + 0.5) * w / out_w - 0.5)``, clamped
    at the edges (replicate behaviour).
    """
    values = np.asarray(values, dtype=np.float64)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"resample target must be positive, got {out_h}x{out_w}")
    h, w = values.shape
    src_r = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    src_c = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    rr, cc = np.meshgrid(src_r, src_c, indexing="ij")
    return bilinear_sample(values, rr, cc)
