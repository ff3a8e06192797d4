"""Experiment drivers shared by the command-line tools and the test suite.

Every driver takes a seed and derives all randomness through per-purpose
counter streams, so outputs are reproducible bit-for-bit and independent
of worker count: parallel paths only ever map pure functions over
pre-drawn work items with an order-preserving gather.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .contrast import FixedNoise, contrast_marginal, patch_mean_curve
from .descriptors import BilinearKernel, accumulate_histogram, clamp_normalize, sift_integrand
from .hierarchy import (
    ToyLayeredModel,
    direct_marginal,
    layered_marginal,
    make_random_model,
    shift_signal,
)
from .image import GrayImage, compute_gradient, extract_patch, to_polar
from .rngstreams import stream_rng
from .sal import RegularScheme, SalResult, sal_likelihood

__all__ = [
    "ordered_map",
    "bin_average_circular",
    "CurveTrial",
    "orientation_curve_trials",
    "ClampStudyResult",
    "clamp_study",
    "peakedness_battery",
    "SalMatchOutcome",
    "sal_match_experiment",
    "HierarchyTrialRow",
    "hierarchy_battery",
]


def ordered_map(fn, items, workers: int = 1) -> list:
    """Map ``fn`` over ``items`` preserving order, optionally on a thread pool."""
    items = list(items)
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def bin_average_circular(values, bins: int) -> np.ndarray:
    """Average a circular curve over windows centered on the histogram bins.

    ``values`` samples a periodic function on a uniform grid starting at
    ``-pi``; bin ``b`` of the result averages the window of width one bin
    centered at ``-pi + 2 pi b / bins``, wrapping around the circle.  The
    grid length must be divisible by ``2 * bins`` so window edges fall on
    grid points.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if values.ndim != 1 or n == 0:
        raise ValueError("curve values must be a nonempty 1-D array")
    if bins < 1 or n % (2 * bins) != 0:
        raise ValueError(f"grid length {n} must be a multiple of 2 * bins = {2 * bins}")
    half = n // (2 * bins)
    step = n // bins
    out = np.empty(bins, dtype=np.float64)
    for b in range(bins):
        idx = np.arange(step * b - half, step * b + half) % n
        out[b] = float(values[idx].mean())
    return out


@dataclass(frozen=True)
class CurveTrial:
    """One random pixel's likelihood curve next to its histogram integrand."""

    index: int
    image_index: int
    row: int
    col: int
    beta: float
    gamma: float
    marginal: np.ndarray
    sift: np.ndarray
    marginal_binned: np.ndarray
    sift_binned: np.ndarray


def orientation_curve_trials(
    images,
    seed: int,
    trials: int,
    eps: float = 0.1,
    bins: int = 8,
    n_grid: int = 360,
    bin_grid: int = 1280,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, list[CurveTrial]]:
    """Evaluate marginal and histogram-integrand curves at random pixels.

    Trial ``t`` draws its image and pixel from stream ``t`` of ``seed``,
    making the list independent of evaluation order.  Returns the dense
    angle grid, the bin centers, and one :class:`CurveTrial` per trial.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    images = list(images)
    if not images:
        raise ValueError("no input images")
    polars = [to_polar(compute_gradient(img)) for img in images]
    model = FixedNoise(eps)
    kernel_eps = 2.0 * math.pi / bins
    alphas = -np.pi + 2.0 * np.pi * np.arange(n_grid) / n_grid
    fine = -np.pi + 2.0 * np.pi * np.arange(bin_grid) / bin_grid
    centers = -np.pi + 2.0 * np.pi * np.arange(bins) / bins

    def run(t: int) -> CurveTrial:
        rng = stream_rng(seed, t)
        idx = int(rng.integers(0, len(images)))
        pol = polars[idx]
        r = int(rng.integers(0, pol.shape[0]))
        c = int(rng.integers(0, pol.shape[1]))
        grad = (float(pol.angle[r, c]), float(pol.magnitude[r, c]))
        marg = contrast_marginal(alphas, grad, model)
        sift = sift_integrand(alphas, grad, kernel_eps)
        marg_b = bin_average_circular(contrast_marginal(fine, grad, model), bins)
        sift_b = bin_average_circular(sift_integrand(fine, grad, kernel_eps), bins)
        return CurveTrial(t, idx, r, c, grad[0], grad[1], marg, sift, marg_b, sift_b)

    return alphas, centers, ordered_map(run, range(trials), workers)


@dataclass(frozen=True)
class ClampStudyResult:
    """Mean L1 distances between clamped histograms and binned marginals."""

    taus: tuple[float, ...]
    l1_coarse: tuple[float, ...]
    l1_fine: tuple[float, ...]
    bins_coarse: int
    bins_fine: int
    n_patches_used: int

    @property
    def tau_star(self) -> float:
        """Sweep value (excluding the no-clamp control) with least coarse L1."""
        sweep = [(l1, t) for t, l1 in zip(self.taus, self.l1_coarse) if t < 1.0]
        if not sweep:
            raise ValueError("no sweep entries below the control")
        return min(sweep)[1]

    @property
    def control_l1(self) -> float | None:
        for t, l1 in zip(self.taus, self.l1_coarse):
            if t == 1.0:
                return l1
        return None


def clamp_study(
    images,
    seed: int,
    n_patches: int = 40,
    patch_size: int = 16,
    eps: float = 0.1,
    bins_coarse: int = 8,
    bins_fine: int = 64,
    taus: tuple[float, ...] = (1.0, 0.5, 0.4, 0.3, 0.2, 0.1),
    n_grid: int = 1280,
    workers: int = 1,
) -> ClampStudyResult:
    """Compare clamped orientation histograms to exact patch marginals.

    Random patches come from one shared stream (image index, then row, then
    column per patch).  For each patch the exact patch-mean likelihood
    curve is bin-averaged at both bin counts, the bilinear-kernel
    histograms are clamped at each ``tau`` and normalized to densities, and
    the study records the mean L1 density distance per ``(tau, bins)``.
    ``tau = 1.0`` rows are the no-clamp control.  Gradient-free patches are
    skipped.
    """
    images = [img if isinstance(img, GrayImage) else GrayImage(np.asarray(img)) for img in images]
    if not images:
        raise ValueError("no input images")
    rng = stream_rng(seed, 0)
    draws = []
    for _ in range(n_patches):
        img = images[int(rng.integers(0, len(images)))]
        if img.height <= patch_size or img.width <= patch_size:
            raise ValueError(
                f"{img.height}x{img.width} image cannot supply interior "
                f"{patch_size}x{patch_size} patches"
            )
        r0 = int(rng.integers(0, img.height - patch_size))
        c0 = int(rng.integers(0, img.width - patch_size))
        draws.append((img, r0, c0))
    model = FixedNoise(eps)
    half = patch_size // 2

    def run(draw):
        img, r0, c0 = draw
        pol = to_polar(compute_gradient(extract_patch(img, (r0 + half, c0 + half), patch_size)))
        if float(pol.magnitude.max()) <= 0.0:
            return None
        curve = patch_mean_curve(pol, model, n_grid=n_grid)
        rect = (0, 0, patch_size, patch_size)
        out = {}
        for bins in (bins_coarse, bins_fine):
            marg = bin_average_circular(curve.values, bins)
            hist = accumulate_histogram(pol, rect, bins, BilinearKernel(2.0 * np.pi / bins))
            width = 2.0 * np.pi / bins
            out[bins] = tuple(
                float(np.abs(clamp_normalize(hist, t).mass - marg).sum() * width) for t in taus
            )
        return out

    per_patch = [r for r in ordered_map(run, draws, workers) if r is not None]
    if not per_patch:
        raise ValueError("every sampled patch was gradient-free")
    l1c = tuple(
        float(np.mean([p[bins_coarse][i] for p in per_patch])) for i in range(len(taus))
    )
    l1f = tuple(
        float(np.mean([p[bins_fine][i] for p in per_patch])) for i in range(len(taus))
    )
    return ClampStudyResult(
        taus=tuple(float(t) for t in taus),
        l1_coarse=l1c,
        l1_fine=l1f,
        bins_coarse=bins_coarse,
        bins_fine=bins_fine,
        n_patches_used=len(per_patch),
    )


def peakedness_battery(
    images,
    seed: int = 4242,
    n_samples: int = 400,
    eps: float = 0.1,
    bins: int = 8,
    gamma_min: float = 0.05,
    n_grid: int = 360,
) -> tuple[int, int]:
    """Count pixels whose histogram integrand is more peaked than the marginal.

    Pixels with gradient magnitude at most ``gamma_min`` are redrawn (flat
    regions make both curves constant).  Peakedness is the max/mean ratio
    over a dense angle grid; returns ``(wins, n_samples)`` where a win
    means the bilinear-kernel integrand ratio strictly exceeds the
    contrast-marginalized one.  The rejection loop is inherently
    sequential, so this driver takes no worker count.
    """
    images = list(images)
    if not images:
        raise ValueError("no input images")
    polars = [to_polar(compute_gradient(img)) for img in images]
    model = FixedNoise(eps)
    kernel_eps = 2.0 * np.pi / bins
    alphas = -np.pi + 2.0 * np.pi * np.arange(n_grid) / n_grid
    rng = stream_rng(seed, 0)
    count = 0
    wins = 0
    while count < n_samples:
        idx = int(rng.integers(0, len(images)))
        pol = polars[idx]
        r = int(rng.integers(1, pol.shape[0] - 1))
        c = int(rng.integers(1, pol.shape[1] - 1))
        gamma = float(pol.magnitude[r, c])
        if gamma <= gamma_min:
            continue
        count += 1
        grad = (float(pol.angle[r, c]), gamma)
        marg = contrast_marginal(alphas, grad, model)
        sift = sift_integrand(alphas, grad, kernel_eps)
        if sift.max() / sift.mean() > marg.max() / marg.mean():
            wins += 1
    return wins, n_samples


@dataclass(frozen=True)
class SalMatchOutcome:
    """A planted-patch recovery: where it went in, what matching found."""

    patch: np.ndarray
    scene: np.ndarray
    planted_tx: int
    planted_ty: int
    result: SalResult

    @property
    def pose_error(self) -> float:
        best = self.result.best
        return float(math.hypot(best.tx - self.planted_tx, best.ty - self.planted_ty))


def sal_match_experiment(
    source,
    scene,
    seed: int,
    patch_size: int = 16,
    stride: int = 2,
    scale_steps: int = 1,
    scale_base: float = 1.1,
    eps: float = 0.1,
    workers: int = 1,
) -> SalMatchOutcome:
    """Plant a patch from ``source`` into ``scene`` at a seeded pose, then match.

    The template is cut from a random position of ``source`` and pasted
    into a copy of ``scene`` at a random position kept far enough from the
    border that the pooled scoring stencil stays usable.  Matching sweeps a
    regular translation-scale lattice; the outcome records the planted pose
    alongside the full score table.
    """
    src = source.values if isinstance(source, GrayImage) else np.asarray(source, dtype=np.float64)
    scn = scene.values if isinstance(scene, GrayImage) else np.asarray(scene, dtype=np.float64)
    hs, ws = src.shape
    h, w = scn.shape
    if hs < patch_size or ws < patch_size:
        raise ValueError(f"{hs}x{ws} source cannot supply a {patch_size}-pixel patch")
    margin = int(math.ceil(0.1 * patch_size)) + 2
    lo = margin
    hi_r = h - patch_size - margin
    hi_c = w - patch_size - margin
    if hi_r < lo or hi_c < lo:
        raise ValueError(f"{h}x{w} scene too small to plant a {patch_size}-pixel patch")
    rng = stream_rng(seed, 0)
    src_r0 = int(rng.integers(0, hs - patch_size + 1))
    src_c0 = int(rng.integers(0, ws - patch_size + 1))
    dst_r0 = int(rng.integers(lo, hi_r + 1))
    dst_c0 = int(rng.integers(lo, hi_c + 1))
    patch = src[src_r0 : src_r0 + patch_size, src_c0 : src_c0 + patch_size].copy()
    planted = scn.copy()
    planted[dst_r0 : dst_r0 + patch_size, dst_c0 : dst_c0 + patch_size] = patch
    result = sal_likelihood(
        patch,
        planted,
        RegularScheme(stride=stride, scale_steps=scale_steps, scale_base=scale_base),
        model=FixedNoise(eps),
        map_fn=(lambda f, xs: ordered_map(f, xs, workers)),
    )
    return SalMatchOutcome(
        patch=patch,
        scene=planted,
        planted_tx=dst_c0,
        planted_ty=dst_r0,
        result=result,
    )


@dataclass(frozen=True)
class HierarchyTrialRow:
    """Agreement checks for one random layered model."""

    index: int
    n: int
    k1: int
    k2: int
    n_classes: int
    alphabet_size: int
    layered_vs_direct: float
    shift_covariance: float


def hierarchy_battery(seed: int, n_models: int = 50, workers: int = 1) -> list[HierarchyTrialRow]:
    """Random-model battery for the layered evaluation identities.

    Per model: draw sizes, tables, a signal, a class, and a shift from the
    model's own stream; record the absolute gap between layered and direct
    marginals, and between shifting the signal versus rolling the model's
    top-level shift table.
    """
    if n_models < 1:
        raise ValueError(f"need at least one model, got {n_models}")

    def run(t: int) -> HierarchyTrialRow:
        rng = stream_rng(seed, t)
        n = int(rng.integers(2, 9))
        k1 = int(rng.integers(1, 4))
        k2 = int(rng.integers(1, 4))
        n_classes = int(rng.integers(1, 3))
        alphabet = int(rng.integers(2, 4))
        model = make_random_model(
            rng, n=n, k1=k1, k2=k2, n_classes=n_classes, alphabet_size=alphabet
        )
        y = rng.integers(0, alphabet, n)
        theta = int(rng.integers(0, n_classes))
        g = int(rng.integers(0, n))
        gap_eval = abs(direct_marginal(y, model, theta) - layered_marginal(y, model, theta))
        rolled = ToyLayeredModel(
            model.templates, model.assignment, np.roll(model.top, g, axis=2)
        )
        gap_shift = abs(
            layered_marginal(shift_signal(y, g), model, theta)
            - layered_marginal(y, rolled, theta)
        )
        return HierarchyTrialRow(t, n, k1, k2, n_classes, alphabet, gap_eval, gap_shift)

    return ordered_map(run, range(n_models), workers)
