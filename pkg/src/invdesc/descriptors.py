"""Gradient-orientation histograms, descriptor grids, and angular kernels.

The descriptor pipeline accumulates, for each spatial cell of a patch, a
histogram of gradient orientations weighted by gradient magnitude and an
angular kernel - the discrete, spatially pooled counterpart of the
contrast-marginalized orientation density.  A 4x4 grid of 8-bin histograms
gives the familiar 128-entry descriptor; scale pooling averages descriptors
of the same patch resampled to several sizes under an exponential scale
prior.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .image import GrayImage, PolarGradient, compute_gradient, to_polar, wrap_angle
from .interp import resample
from .validation import as_float_image, check_square_multiple

__all__ = [
    "BilinearKernel",
    "TildeGaussianKernel",
    "RectifiedCosinePowerKernel",
    "AngularGaussianKernel",
    "Kernel",
    "eval_kernel",
    "sift_integrand",
    "OrientationHistogram",
    "accumulate_histogram",
    "clamp_normalize",
    "SiftParams",
    "SiftDescriptor",
    "sift_descriptor",
    "ScalePrior",
    "dsp_sift_descriptor",
    "dominant_orientations",
    "DEFAULT_SCALES",
]


def _check_positive(name: str, value: float) -> None:
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class BilinearKernel:
    """Triangular angular kernel ``(eps - |a|) / eps^2`` on ``[-eps, eps]``.

    Peak ``1/eps`` at 0, zero outside the support, unit integral.  The exact
    scaling identity is ``kappa_eps(a) * b = kappa_{eps/b}(a / b)`` for any
    ``b > 0`` (rescaling the angle axis while preserving unit mass).
    """

    epsilon: float

    def __post_init__(self) -> None:
        _check_positive("epsilon", self.epsilon)

    def __call__(self, alpha):
        a = np.abs(wrap_angle(alpha))
        return np.where(a <= self.epsilon, (self.epsilon - a) / self.epsilon**2, 0.0)


@dataclass(frozen=True)
class TildeGaussianKernel:
    """Periodic concentration kernel ``exp(-sin(a)^2 / (2 eps^2))``.

    The large signal-to-noise shape of the contrast-marginalized density;
    note it peaks at both 0 and pi (orientation, not direction).
    """

    epsilon: float

    def __post_init__(self) -> None:
        _check_positive("epsilon", self.epsilon)

    def __call__(self, alpha):
        s = np.sin(np.asarray(alpha, dtype=np.float64))
        return np.exp(-(s * s) / (2.0 * self.epsilon**2))


@dataclass(frozen=True)
class RectifiedCosinePowerKernel:
    """``max(0, cos a) ** power``; ``power`` is the inverse width parameter."""

    power: float

    def __post_init__(self) -> None:
        _check_positive("power", self.power)

    def __call__(self, alpha):
        c = np.maximum(0.0, np.cos(np.asarray(alpha, dtype=np.float64)))
        return c**self.power


@dataclass(frozen=True)
class AngularGaussianKernel:
    """``exp(-a^2 / (2 eps^2))`` evaluated on the wrapped branch ``[-pi, pi)``."""

    epsilon: float

    def __post_init__(self) -> None:
        _check_positive("epsilon", self.epsilon)

    def __call__(self, alpha):
        a = wrap_angle(alpha)
        return np.exp(-(a * a) / (2.0 * self.epsilon**2))


Kernel = BilinearKernel | TildeGaussianKernel | RectifiedCosinePowerKernel | AngularGaussianKernel


def eval_kernel(kernel: Kernel, alpha):
    """Evaluate an angular kernel at (arrays of) angle differences."""
    return kernel(alpha)


def sift_integrand(alpha, grad_x: tuple[float, float], epsilon: float):
    """Per-pixel histogram contribution ``kappa_eps(alpha - beta) * gamma``."""
    beta, gamma = grad_x
    if not (np.isfinite(gamma) and gamma >= 0):
        raise ValueError(f"reference magnitude must be finite and >= 0, got {gamma}")
    return BilinearKernel(epsilon)(np.asarray(alpha, dtype=np.float64) - beta) * gamma


@dataclass(frozen=True)
class OrientationHistogram:
    """Per-bin angular mass on a uniform circular binning.

    Bin ``b`` is centered at ``-pi + 2 pi b / bins``.  ``mass`` entries are
    nonnegative; after :func:`clamp_normalize` they hold per-unit-angle
    densities instead of raw masses (``sum(mass) * bin_width == 1``).
    """

    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.ndim != 1 or mass.size == 0:
            raise ValueError("histogram mass must be a nonempty 1-D array")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("histogram mass must be finite and nonnegative")
        object.__setattr__(self, "mass", mass)

    @property
    def bins(self) -> int:
        return self.mass.size

    @property
    def bin_width(self) -> float:
        return 2.0 * math.pi / self.bins

    @property
    def bin_centers(self) -> np.ndarray:
        return -np.pi + 2.0 * np.pi * np.arange(self.bins, dtype=np.float64) / self.bins

    def probability_masses(self) -> np.ndarray:
        """Per-bin probability masses of a density-normalized histogram."""
        return self.mass * self.bin_width


def _spatial_weights(h: int, w: int, mode: str, sigma: float | None) -> np.ndarray:
    """Spatial windowing over a cell, centered at its geometric center."""
    if mode == "uniform":
        return np.ones((h, w), dtype=np.float64)
    cr = (h - 1) / 2.0
    cc = (w - 1) / 2.0
    rr, cc_grid = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    if sigma is None:
        sigma = max(h, w) / 2.0
    if mode == "gaussian":
        d2 = (rr - cr) ** 2 + (cc_grid - cc) ** 2
        return np.exp(-d2 / (2.0 * sigma * sigma))
    if mode == "tent":
        half_h = max(h / 2.0, 1.0)
        half_w = max(w / 2.0, 1.0)
        return np.maximum(0.0, 1.0 - np.abs(rr - cr) / half_h) * np.maximum(
            0.0, 1.0 - np.abs(cc_grid - cc) / half_w
        )
    raise ValueError(f"unknown spatial weighting mode {mode!r}")


def accumulate_histogram(
    polar: PolarGradient,
    rect: tuple[int, int, int, int],
    bins: int,
    kernel: Kernel,
    spatial: str = "uniform",
    spatial_sigma: float | None = None,
) -> OrientationHistogram:
    """Accumulate kernel-weighted gradient mass over one rectangular cell.

    ``rect = (row0, col0, height, width)`` selects the cell inside the polar
    field.  Each pixel contributes ``w_spatial * kernel(center_b - angle) *
    magnitude`` to every bin ``b``; zero-magnitude pixels contribute nothing
    regardless of their conventional angle.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    r0, c0, h, w = rect
    H, W = polar.shape
    if h < 1 or w < 1:
        raise ValueError(f"empty cell: {rect}")
    if r0 < 0 or c0 < 0 or r0 + h > H or c0 + w > W:
        raise ValueError(f"cell {rect} leaves the {H}x{W} field")
    ang = polar.angle[r0 : r0 + h, c0 : c0 + w]
    mag = polar.magnitude[r0 : r0 + h, c0 : c0 + w]
    weight = _spatial_weights(h, w, spatial, spatial_sigma)
    centers = -np.pi + 2.0 * np.pi * np.arange(bins, dtype=np.float64) / bins
    weighted = weight * mag
    mass = np.empty(bins, dtype=np.float64)
    for b in range(bins):
        mass[b] = float(np.sum(kernel(centers[b] - ang) * weighted))
    return OrientationHistogram(mass)


def clamp_normalize(hist: OrientationHistogram, tau_frac: float = 0.2) -> OrientationHistogram:
    """Clamp bins at ``tau_frac`` of the peak, then normalize to a density.

    The result stores per-unit-angle values whose bin-width-weighted total
    is 1; multiply by ``bin_width`` to recover probability masses.  A
    histogram with no mass cannot be normalized and raises ``ValueError``.
    """
    if not (0.0 < tau_frac <= 1.0):
        raise ValueError(f"tau_frac must lie in (0, 1], got {tau_frac}")
    peak = float(np.max(hist.mass))
    if peak <= 0.0:
        raise ValueError("histogram has no mass to normalize")
    clipped = np.minimum(hist.mass, tau_frac * peak)
    return OrientationHistogram(clipped / (float(np.sum(clipped)) * hist.bin_width))


@dataclass(frozen=True)
class SiftParams:
    """Configuration of the descriptor grid.

    ``epsilon = None`` means the kernel width defaults to the bin width
    ``2 pi / bins``; ``spatial_sigma = None`` defaults to half the cell side.
    """

    bins: int = 8
    grid: int = 4
    kernel: str = "bilinear"
    epsilon: float | None = None
    spatial: str = "gaussian"
    spatial_sigma: float | None = None

    def __post_init__(self) -> None:
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if self.grid < 1:
            raise ValueError(f"grid must be >= 1, got {self.grid}")
        if self.kernel not in ("bilinear", "tilde_gaussian", "rectified_cosine", "angular_gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.spatial not in ("gaussian", "tent", "uniform"):
            raise ValueError(f"unknown spatial weighting {self.spatial!r}")

    def make_kernel(self) -> Kernel:
        eps = self.epsilon if self.epsilon is not None else 2.0 * math.pi / self.bins
        if self.kernel == "bilinear":
            return BilinearKernel(eps)
        if self.kernel == "tilde_gaussian":
            return TildeGaussianKernel(eps)
        if self.kernel == "rectified_cosine":
            return RectifiedCosinePowerKernel(1.0 / eps)
        return AngularGaussianKernel(eps)


@dataclass(frozen=True)
class SiftDescriptor:
    """A ``grid x grid`` spatial array of orientation histograms."""

    grid: np.ndarray
    params: SiftParams

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 3 or grid.shape[0] != grid.shape[1]:
            raise ValueError(f"descriptor grid must be (cells, cells, bins), got {grid.shape}")
        if np.any(grid < 0) or not np.all(np.isfinite(grid)):
            raise ValueError("descriptor entries must be finite and nonnegative")
        object.__setattr__(self, "grid", grid)

    def as_vector(self) -> np.ndarray:
        return self.grid.reshape(-1)

    def to_csv_row(self) -> str:
        return ",".join(f"{v:.17g}" for v in self.as_vector())

    def to_json(self) -> str:
        payload = {
            "params": {
                "bins": self.params.bins,
                "grid": self.params.grid,
                "kernel": self.params.kernel,
                "epsilon": self.params.epsilon,
                "spatial": self.params.spatial,
                "spatial_sigma": self.params.spatial_sigma,
            },
            "values": [float(v) for v in self.as_vector()],
        }
        return json.dumps(payload, sort_keys=True)


def sift_descriptor(patch, params: SiftParams = SiftParams()) -> SiftDescriptor:
    """Descriptor of a square patch whose side is a multiple of the cell grid.

    The gradient is computed from the patch content alone (replicate border),
    each cell accumulates its own spatially weighted orientation histogram,
    and no normalization is applied - descriptor mass scales linearly with
    image contrast.
    """
    arr = as_float_image(patch)
    side = check_square_multiple(arr, params.grid)
    cell = side // params.grid
    polar = to_polar(compute_gradient(GrayImage(arr)))
    kernel = params.make_kernel()
    sigma = params.spatial_sigma if params.spatial_sigma is not None else cell / 2.0
    grid = np.empty((params.grid, params.grid, params.bins), dtype=np.float64)
    for i in range(params.grid):
        for j in range(params.grid):
            hist = accumulate_histogram(
                polar,
                (i * cell, j * cell, cell, cell),
                params.bins,
                kernel,
                spatial=params.spatial,
                spatial_sigma=sigma,
            )
            grid[i, j] = hist.mass
    return SiftDescriptor(grid, params)


DEFAULT_SCALES: tuple[float, ...] = tuple(2.0 ** (k / 2.0) for k in range(-2, 3))


@dataclass(frozen=True)
class ScalePrior:
    """Discrete scale prior: ordered positive scales with convex weights."""

    scales: tuple[float, ...]
    weights: tuple[float, ...]
    rate: float = 1.0

    def __post_init__(self) -> None:
        if len(self.scales) == 0 or len(self.scales) != len(self.weights):
            raise ValueError("scales and weights must be nonempty and equal length")
        if any(not (np.isfinite(s) and s > 0) for s in self.scales):
            raise ValueError("scales must be finite and positive")
        if list(self.scales) != sorted(self.scales):
            raise ValueError("scales must be sorted ascending")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {sum(self.weights)}")
        _check_positive("rate", self.rate)

    @classmethod
    def exponential(cls, scales=DEFAULT_SCALES, rate: float = 1.0) -> "ScalePrior":
        """Weights proportional to an exponential density at each scale."""
        _check_positive("rate", rate)
        scales = tuple(float(s) for s in scales)
        raw = [math.exp(-rate * s) for s in scales]
        total = sum(raw)
        return cls(scales, tuple(r / total for r in raw), rate)


def _scaled_side(side: int, scale: float, grid: int) -> int:
    """Nearest multiple of ``grid`` to ``side * scale``; errors below one cell row."""
    target = side * scale
    snapped = grid * int(round(target / grid))
    if snapped < grid or round(target) < grid:
        raise ValueError(
            f"scale {scale} shrinks a side-{side} patch below the {grid}x{grid} cell grid"
        )
    return snapped


def dsp_sift_descriptor(
    patch, prior: ScalePrior, params: SiftParams = SiftParams()
) -> SiftDescriptor:
    """Scale-pooled descriptor: prior-weighted average over resampled copies.

    Every entry lies in the convex hull of the single-scale descriptor
    entries since the prior weights are convex.
    """
    arr = as_float_image(patch)
    side = check_square_multiple(arr, params.grid)
    grid = np.zeros((params.grid, params.grid, params.bins), dtype=np.float64)
    for scale, weight in zip(prior.scales, prior.weights):
        new_side = _scaled_side(side, scale, params.grid)
        scaled = arr if new_side == side else resample(arr, new_side, new_side)
        grid += weight * sift_descriptor(scaled, params).grid
    return SiftDescriptor(grid, params)


def dominant_orientations(
    patch,
    max_count: int = 2,
    prominence: float = 0.8,
    bins: int = 36,
) -> list[float]:
    """Magnitude-weighted dominant gradient orientations of a patch.

    Gradient magnitude is soft-binned (split linearly between the two
    nearest bin centers, circularly), so content concentrated on a bin
    boundary is recovered exactly.  Peaks are bins at least as massive as
    both neighbors that reach ``prominence`` times the global peak, refined
    by fitting a parabola through the bin and its neighbors.  Ordered by
    peak mass (descending), deduplicated, truncated to ``max_count``; a
    flat patch yields an empty list.
    """
    arr = as_float_image(patch)
    if min(arr.shape) < 8:
        raise ValueError(f"patch too small for orientation estimation: {arr.shape} (need >= 8x8)")
    if not (0.0 < prominence <= 1.0):
        raise ValueError(f"prominence must lie in (0, 1], got {prominence}")
    if max_count < 1:
        raise ValueError(f"max_count must be >= 1, got {max_count}")
    polar = to_polar(compute_gradient(GrayImage(arr)))
    width = 2.0 * math.pi / bins
    # position on the circular lattice of bin centers -pi + (b + 1/2) width
    t = (polar.angle.ravel() + np.pi) / width - 0.5
    lo = np.floor(t)
    frac = t - lo
    lo = lo.astype(np.intp) % bins
    mag = polar.magnitude.ravel()
    hist = np.bincount(lo, weights=mag * (1.0 - frac), minlength=bins)
    hist += np.bincount((lo + 1) % bins, weights=mag * frac, minlength=bins)
    peak = float(np.max(hist))
    if peak <= 0.0:
        return []
    found: list[tuple[float, int, float]] = []
    for b in range(bins):
        left = hist[(b - 1) % bins]
        right = hist[(b + 1) % bins]
        if hist[b] >= left and hist[b] >= right and hist[b] >= prominence * peak:
            denom = left - 2.0 * hist[b] + right
            offset = 0.0 if denom == 0.0 else 0.5 * (left - right) / denom
            center = -math.pi + (b + 0.5) * width + offset * width
            found.append((float(hist[b]), b, float(wrap_angle(center))))
    found.sort(key=lambda t: (-t[0], t[1]))
    out: list[float] = []
    for _, _, angle in found:
        if all(abs(wrap_angle(angle - prev)) > 1e-9 for prev in out):
            out.append(angle)
        if len(out) == max_count:
            break
    return out
