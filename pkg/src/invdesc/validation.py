"""Input-coercion helpers shared by the functional core, estimators, and CLI."""

from __future__ import annotations

import numpy as np

from .image import GradientField, GrayImage, Patch, PolarGradient, compute_gradient, to_polar

__all__ = [
    "as_float_image",
    "as_gray_image",
    "as_polar",
    "check_square_multiple",
]


def as_float_image(obj) -> np.ndarray:
    """Return the 2-D float array behind an image-like object.

    Accepts ``GrayImage``, ``Patch``, or anything ``np.asarray`` turns into a
    finite 2-D array.
    """
    if isinstance(obj, GrayImage):
        return obj.values
    if isinstance(obj, Patch):
        return obj.values
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image array, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("zero-dimension image")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image values must be finite")
    return arr


def as_gray_image(obj) -> GrayImage:
    """Coerce an image-like object to ``GrayImage``."""
    if isinstance(obj, GrayImage):
        return obj
    return GrayImage(as_float_image(obj))


def as_polar(obj) -> PolarGradient:
    """Coerce to a polar gradient field.

    Accepts ``PolarGradient`` (returned as-is), ``GradientField``, or an
    image-like object whose gradient is computed first.
    """
    if isinstance(obj, PolarGradient):
        return obj
    if isinstance(obj, GradientField):
        return to_polar(obj)
    return to_polar(compute_gradient(as_gray_image(obj)))


def check_square_multiple(arr: np.ndarray, multiple: int, what: str = "patch") -> int:
    """Require a square array whose side is a positive multiple of ``multiple``."""
    h, w = arr.shape
    if h != w:
        raise ValueError(f"{what} must be square, got {h}x{w}")
    if h == 0 or h % multiple != 0:
        raise ValueError(f"{what} side must be a positive multiple of {multiple}, got {h}")
    return h
