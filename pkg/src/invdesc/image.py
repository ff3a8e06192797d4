"""Grayscale images, finite-difference gradient fields, and patches.

Conventions used throughout the package:

- images are row-major ``(height, width)`` float arrays; ``v`` indexes rows
  and ``u`` indexes columns;
- ``compute_gradient`` returns per-pixel central differences ``gx = dx/du``
  (along columns) and ``gy = dx/dv`` (along rows), with replicate padding at
  the border;
- angles follow ``atan2(gy, gx)`` wrapped to the half-open interval
  ``[-pi, pi)``, and the angle of a zero-magnitude gradient is defined as 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

__all__ = [
    "GrayImage",
    "GradientField",
    "PolarGradient",
    "Patch",
    "load_image",
    "compute_gradient",
    "to_polar",
    "extract_patch",
    "wrap_angle",
]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def wrap_angle(alpha):
    """Wrap angles to the half-open interval ``[-pi, pi)``."""
    return np.remainder(np.asarray(alpha, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GrayImage:
    """A single-channel image.

    ``values`` holds finite scalar intensities.  The file loaders normalize
    to ``[0, 1]``; direct construction accepts any finite values so that
    synthetic and affinely rescaled images remain expressible.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"image values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("zero-dimension image")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GradientField:
    """Per-pixel gradient components ``gx`` (along columns), ``gy`` (rows)."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self) -> None:
        gx = np.asarray(self.gx, dtype=np.float64)
        gy = np.asarray(self.gy, dtype=np.float64)
        if gx.ndim != 2 or gx.shape != gy.shape:
            raise ValueError(
                f"gradient components must share a 2-D shape, got {gx.shape} and {gy.shape}"
            )
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
            raise ValueError("gradient components must be finite")
        object.__setattr__(self, "gx", _freeze(gx))
        object.__setattr__(self, "gy", _freeze(gy))

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape


@dataclass(frozen=True)
class PolarGradient:
    """Gradient field in polar form: ``angle`` in ``[-pi, pi)``, ``magnitude >= 0``.

    The angle at zero-magnitude pixels is 0 by convention; ``zero_mask``
    flags those pixels.
    """

    angle: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self) -> None:
        ang = np.asarray(self.angle, dtype=np.float64)
        mag = np.asarray(self.magnitude, dtype=np.float64)
        if ang.ndim != 2 or ang.shape != mag.shape:
            raise ValueError(
                f"angle and magnitude must share a 2-D shape, got {ang.shape} and {mag.shape}"
            )
        if not (np.all(np.isfinite(ang)) and np.all(np.isfinite(mag))):
            raise ValueError("polar gradient entries must be finite")
        if np.any(mag < 0.0):
            raise ValueError("gradient magnitudes must be nonnegative")
        if np.any(ang < -np.pi) or np.any(ang >= np.pi):
            raise ValueError("angles must lie in [-pi, pi)")
        if np.any(ang[mag == 0.0] != 0.0):
            raise ValueError("zero-magnitude pixels must carry angle 0")
        object.__setattr__(self, "angle", _freeze(ang))
        object.__setattr__(self, "magnitude", _freeze(mag))

    @property
    def shape(self) -> tuple[int, int]:
        return self.angle.shape

    @property
    def zero_mask(self) -> np.ndarray:
        return self.magnitude == 0.0

    def to_cartesian(self) -> GradientField:
        return GradientField(
            self.magnitude * np.cos(self.angle),
            self.magnitude * np.sin(self.angle),
        )


@dataclass(frozen=True)
class Patch:
    """A square window into a parent image; ``values`` is a view, not a copy."""

    parent: GrayImage
    origin: tuple[int, int]
    side: int

    def __post_init__(self) -> None:
        r0, c0 = self.origin
        if self.side < 1:
            raise ValueError(f"patch side must be >= 1, got {self.side}")
        if (
            r0 < 0
            or c0 < 0
            or r0 + self.side > self.parent.height
            or c0 + self.side > self.parent.width
        ):
            raise ValueError(
                f"patch origin {self.origin} with side {self.side} leaves the "
                f"{self.parent.height}x{self.parent.width} parent image"
            )

    @property
    def values(self) -> np.ndarray:
        r0, c0 = self.origin
        return self.parent.values[r0 : r0 + self.side, c0 : c0 + self.side]


def _parse_pgm(raw: bytes, path: Path) -> np.ndarray:
    """Parse an 8-bit binary PGM (``P5``) payload into a float array in [0, 1]."""
    pos = 2  # past magic
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(raw):
            raise ValueError(f"unsupported image format: truncated PGM header in {path}")
        ch = raw[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(raw) and raw[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(raw[start:pos]))
        else:
            raise ValueError(f"unsupported image format: malformed PGM header in {path}")
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise ValueError(f"zero-dimension image: {path}")
    if not 1 <= maxval <= 255:
        raise ValueError(f"unsupported image format: PGM maxval {maxval} (need 8-bit) in {path}")
    pos += 1  # single whitespace byte separating header and raster
    raster = raw[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError(f"unsupported image format: PGM raster size mismatch in {path}")
    data = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return data.astype(np.float64) / 255.0


def load_image(path) -> GrayImage:
    """Load an 8-bit grayscale image (binary PGM or PNG), scaled to ``[0, 1]``.

    Raises ``FileNotFoundError`` for missing files and ``ValueError`` for
    anything that is not an 8-bit single-channel raster.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such image file: {p}")
    raw = p.read_bytes()
    if raw[:2] == b"P5":
        return GrayImage(_parse_pgm(raw, p))
    if raw[: len(_PNG_MAGIC)] == _PNG_MAGIC:
        from PIL import Image

        with Image.open(p) as img:
            if img.mode != "L":
                raise ValueError(
                    f"unsupported image format: PNG mode {img.mode!r} "
                    f"(need 8-bit grayscale) in {p}"
                )
            data = np.asarray(img, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"zero-dimension image: {p}")
        return GrayImage(data / 255.0)
    raise ValueError(f"unsupported image format: {p}")


def compute_gradient(img: GrayImage, presmooth_sigma: float | None = None) -> GradientField:
    """Central-difference gradient with replicate padding at the border.

    ``presmooth_sigma`` optionally applies isotropic Gaussian smoothing
    (replicate boundary) before differencing; the default applies none.
    """
    values = img.values
    h, w = values.shape
    if h < 3 or w < 3:
        raise ValueError(f"image too small for central differences: {h}x{w} (need >= 3x3)")
    if presmooth_sigma is not None:
        if presmooth_sigma < 0:
            raise ValueError("presmooth_sigma must be nonnegative")
        if presmooth_sigma > 0:
            values = ndimage.gaussian_filter(values, presmooth_sigma, mode="nearest")
    padded = np.pad(values, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return GradientField(gx, gy)


def to_polar(grad: GradientField) -> PolarGradient:
    """Convert a gradient field to (angle, magnitude) with the package conventions."""
    magnitude = np.hypot(grad.gx, grad.gy)
    angle = np.arctan2(grad.gy, grad.gx)
    # atan2 returns values in [-pi, pi]; fold the closed endpoint and pin
    # the zero-gradient convention without perturbing anything else.
    angle = np.where(angle == np.pi, -np.pi, angle)
    angle = np.where(magnitude == 0.0, 0.0, angle)
    return PolarGradient(angle, magnitude)


def extract_patch(img: GrayImage, center: tuple[int, int], side: int) -> Patch:
    """Extract the square patch of the given side whose center pixel is ``center``.

    The patch origin is ``center - side // 2`` per component; the patch must
    lie fully inside the image.
    """
    if side < 1:
        raise ValueError(f"patch side must be >= 1, got {side}")
    r0 = int(center[0]) - side // 2
    c0 = int(center[1]) - side // 2
    return Patch(parent=img, origin=(r0, c0), side=side)
