"""Sampled anti-aliased likelihood over the translation-scale group.

A training patch is compared against a test image at a discrete set of
group elements (translations and scales).  Each sample's score is a
weighted soft-max (log-sum-exp) of patch log-likelihoods over a small
stencil of nearby group elements - anti-aliasing the likelihood against
sampling artifacts - and the best-scoring sample is the matched pose.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import logsumexp

from .contrast import FixedNoise, NoiseModel, bind_to_patch, patch_log_likelihood
from .image import GrayImage, compute_gradient, to_polar
from .interp import bilinear_sample
from .validation import as_float_image

__all__ = [
    "GroupElement",
    "RegularScheme",
    "AdaptiveScheme",
    "SamplingScheme",
    "PoolingWeights",
    "StencilOutOfBoundsError",
    "SalResult",
    "apply_group",
    "sample_group",
    "antialiased_score",
    "sal_likelihood",
]


class StencilOutOfBoundsError(ValueError):
    """Raised when a pooling stencil loses half or more of its offsets."""


@dataclass(frozen=True)
class GroupElement:
    """Translation-scale element acting on coordinates as ``u -> s u + t``.

    Composition follows ``(t, s) o (t', s') = (t + s t', s s')`` so that
    applying ``g1 o g2`` equals applying ``g2`` after ``g1`` on resampled
    rasters.  ``tx`` translates columns, ``ty`` rows.
    """

    tx: float
    ty: float
    s: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.tx) and np.isfinite(self.ty) and np.isfinite(self.s)):
            raise ValueError("group element entries must be finite")
        if self.s <= 0:
            raise ValueError(f"scale must be > 0, got {self.s}")

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(0.0, 0.0, 1.0)

    def compose(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.tx + self.s * other.tx,
            self.ty + self.s * other.ty,
            self.s * other.s,
        )

    def inverse(self) -> "GroupElement":
        return GroupElement(-self.tx / self.s, -self.ty / self.s, 1.0 / self.s)


@dataclass(frozen=True)
class RegularScheme:
    """Regular lattice: translations at stride multiples, centered scale ladder.

    Scales are ``scale_base ** (k - (scale_steps - 1) / 2)`` for
    ``k = 0 .. scale_steps - 1`` (a single step means scale 1).  The
    translation lattice spans the image independent of any window size;
    scoring skips samples whose window leaves the image.
    """

    stride: int
    scale_steps: int = 1
    scale_base: float = 1.1

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.scale_steps < 1:
            raise ValueError(f"scale_steps must be >= 1, got {self.scale_steps}")
        if not (np.isfinite(self.scale_base) and self.scale_base > 1.0):
            raise ValueError(f"scale_base must be > 1, got {self.scale_base}")


@dataclass(frozen=True)
class AdaptiveScheme:
    """Blob-driven sampling: difference-of-Gaussian extrema in space and scale.

    The detector blurs the image at ``n_levels`` scales
    ``sigma0 * 2^(k/2)``, takes adjacent differences, and keeps strict
    3x3x3 local extrema whose absolute response reaches ``threshold_frac``
    of the stack maximum, strongest first, capped at ``max_samples``.
    Detected positions translate, so the sample set is equivariant to
    integer shifts of the content (away from the border).
    """

    max_samples: int
    n_levels: int = 6
    sigma0: float = 1.6
    threshold_frac: float = 0.05

    def __post_init__(self) -> None:
        if self.max_samples < 1:
            raise ValueError(f"max_samples must be >= 1, got {self.max_samples}")
        if self.n_levels < 4:
            raise ValueError(f"need at least 4 blur levels for scale extrema, got {self.n_levels}")
        if not (np.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if not (0.0 < self.threshold_frac < 1.0):
            raise ValueError(f"threshold_frac must lie in (0, 1), got {self.threshold_frac}")


SamplingScheme = RegularScheme | AdaptiveScheme


def _default_offsets() -> tuple[tuple[GroupElement, ...], tuple[float, ...]]:
    offsets = []
    raw = []
    for s in (1.0 / 1.1, 1.0, 1.1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                offsets.append(GroupElement(float(dx), float(dy), s))
                w = math.exp(-(dx * dx + dy * dy) / 2.0) * math.exp(
                    -math.log(s) ** 2 / (2.0 * math.log(1.1) ** 2)
                )
                raw.append(w)
    total = sum(raw)
    return tuple(offsets), tuple(w / total for w in raw)


@dataclass(frozen=True)
class PoolingWeights:
    """Convex weights over a stencil of group offsets near the identity."""

    offsets: tuple[GroupElement, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.offsets) == 0 or len(self.offsets) != len(self.weights):
            raise ValueError("offsets and weights must be nonempty and equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {sum(self.weights)}")

    @classmethod
    def default_stencil(cls) -> "PoolingWeights":
        """3x3 translation stencil (+-1 px) times scales {1/1.1, 1, 1.1}."""
        offsets, weights = _default_offsets()
        return cls(offsets, weights)

    @classmethod
    def identity(cls) -> "PoolingWeights":
        return cls((GroupElement.identity(),), (1.0,))


def apply_group(y, g: GroupElement, out_shape: tuple[int, int] | None = None) -> GrayImage:
    """Resample ``y`` at locations ``(s u + tx, s v + ty)`` over an output window.

    The output defaults to the input shape.  Every bilinear sample location
    must stay inside the source raster; integer translations at unit scale
    reproduce source pixels exactly.
    """
    arr = as_float_image(y)
    h, w = arr.shape
    if out_shape is None:
        out_h, out_w = h, w
    else:
        out_h, out_w = out_shape
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output window must be positive, got {out_h}x{out_w}")
    rows = g.s * np.arange(out_h, dtype=np.float64) + g.ty
    cols = g.s * np.arange(out_w, dtype=np.float64) + g.tx
    slack = 1e-9
    if rows[0] < -slack or cols[0] < -slack or rows[-1] > h - 1 + slack or cols[-1] > w - 1 + slack:
        raise ValueError(
            f"transformed window [{rows[0]:.3f}, {rows[-1]:.3f}] x "
            f"[{cols[0]:.3f}, {cols[-1]:.3f}] leaves the {h}x{w} source image"
        )
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return GrayImage(bilinear_sample(arr, rr, cc))


def _window_in_bounds(g: GroupElement, side: int, h: int, w: int) -> bool:
    top = g.ty
    left = g.tx
    bottom = g.ty + g.s * (side - 1)
    right = g.tx + g.s * (side - 1)
    slack = 1e-9
    return top >= -slack and left >= -slack and bottom <= h - 1 + slack and right <= w - 1 + slack


def sample_group(scheme: SamplingScheme, img) -> list[GroupElement]:
    """Enumerate the group samples a scheme produces for an image."""
    arr = as_float_image(img)
    h, w = arr.shape
    if isinstance(scheme, RegularScheme):
        exponents = [k - (scheme.scale_steps - 1) / 2.0 for k in range(scheme.scale_steps)]
        samples = [
            GroupElement(float(tx), float(ty), scheme.scale_base**e)
            for e in exponents
            for ty in range(0, h, scheme.stride)
            for tx in range(0, w, scheme.stride)
        ]
        return samples
    if isinstance(scheme, AdaptiveScheme):
        return _detect_extrema(arr, scheme)
    raise TypeError(f"unknown sampling scheme: {scheme!r}")


def _detect_extrema(arr: np.ndarray, scheme: AdaptiveScheme) -> list[GroupElement]:
    sigmas = [scheme.sigma0 * 2.0 ** (k / 2.0) for k in range(scheme.n_levels)]
    blurred = [ndimage.gaussian_filter(arr, s, mode="nearest") for s in sigmas]
    dog = np.stack([b1 - b0 for b0, b1 in zip(blurred[:-1], blurred[1:])])
    peak = float(np.max(np.abs(dog)))
    if peak <= 0.0:
        return []
    threshold = scheme.threshold_frac * peak
    found: list[tuple[float, int, int, int]] = []
    n_dog, h, w = dog.shape
    for k in range(1, n_dog - 1):
        for r in range(1, h - 1):
            for c in range(1, w - 1):
                v = dog[k, r, c]
                if abs(v) < threshold:
                    continue
                neighbors = dog[k - 1 : k + 2, r - 1 : r + 2, c - 1 : c + 2].copy()
                neighbors[1, 1, 1] = 0.0
                if v > 0 and v > np.max(neighbors):
                    found.append((abs(v), k, r, c))
                elif v < 0 and v < np.min(neighbors):
                    found.append((abs(v), k, r, c))
    found.sort(key=lambda t: (-t[0], t[1], t[2], t[3]))
    out = []
    for _, k, r, c in found[: scheme.max_samples]:
        out.append(GroupElement(float(c), float(r), 2.0 ** (k / 2.0)))
    return out


@dataclass(frozen=True)
class SalResult:
    """Scores of every evaluated group sample, plus the argmax."""

    elements: tuple[GroupElement, ...]
    scores: np.ndarray
    best_index: int

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size != len(self.elements) or scores.size == 0:
            raise ValueError("scores must be a nonempty 1-D array matching the elements")
        if not (0 <= self.best_index < scores.size):
            raise ValueError("best_index out of range")
        object.__setattr__(self, "scores", scores)

    @property
    def best(self) -> GroupElement:
        return self.elements[self.best_index]

    @property
    def best_score(self) -> float:
        return float(self.scores[self.best_index])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("index,tx,ty,s,score\n")
        for i, (g, sc) in enumerate(zip(self.elements, self.scores)):
            buf.write(f"{i},{g.tx:.17g},{g.ty:.17g},{g.s:.17g},{sc:.17g}\n")
        return buf.getvalue()

    def summary_json(self) -> str:
        g = self.best
        return json.dumps(
            {
                "best_index": int(self.best_index),
                "tx": g.tx,
                "ty": g.ty,
                "s": g.s,
                "score": self.best_score,
            },
            sort_keys=True,
        )


def _pooled_score(
    train_polar,
    side: int,
    y_arr: np.ndarray,
    g: GroupElement,
    pooling: PoolingWeights,
    model: NoiseModel,
) -> float:
    h, w = y_arr.shape
    survivors: list[tuple[float, GroupElement]] = []
    for offset, weight in zip(pooling.offsets, pooling.weights):
        gk = g.compose(offset)
        if _window_in_bounds(gk, side, h, w):
            survivors.append((weight, gk))
    if 2 * len(survivors) < len(pooling.offsets):
        raise StencilOutOfBoundsError(
            "pooling stencil leaves the image for more than half its offsets "
            f"at sample (tx={g.tx}, ty={g.ty}, s={g.s})"
        )
    total = sum(w for w, _ in survivors)
    logs = np.empty(len(survivors), dtype=np.float64)
    logw = np.empty(len(survivors), dtype=np.float64)
    for i, (weight, gk) in enumerate(survivors):
        window = apply_group(y_arr, gk, (side, side))
        test = to_polar(compute_gradient(window))
        logs[i] = patch_log_likelihood(test.angle, train_polar, model)
        logw[i] = -np.inf if weight == 0.0 else math.log(weight / total)
    return float(logsumexp(logs + logw))


def antialiased_score(
    x, y, g: GroupElement, pooling: PoolingWeights, model: NoiseModel
) -> float:
    """Soft-pooled log-likelihood of training patch ``x`` at pose ``g`` in ``y``.

    ``log sum_k w_k exp(L_k)`` over the pooling stencil, computed by
    log-sum-exp; offsets whose window leaves ``y`` are dropped with weight
    renormalization as long as at least half the stencil survives.  The
    result always lies between the smallest and largest per-offset
    log-likelihood.
    """
    x_arr = as_float_image(x)
    if x_arr.shape[0] != x_arr.shape[1]:
        raise ValueError(f"training patch must be square, got {x_arr.shape}")
    side = x_arr.shape[0]
    train_polar = to_polar(compute_gradient(GrayImage(x_arr)))
    model = bind_to_patch(model, train_polar)
    return _pooled_score(train_polar, side, as_float_image(y), g, pooling, model)


def sal_likelihood(
    x,
    y,
    scheme: SamplingScheme,
    pooling: PoolingWeights | None = None,
    model: NoiseModel | None = None,
    map_fn=map,
) -> SalResult:
    """Score every viable group sample and locate the best pose.

    Samples whose base window leaves the image are skipped; ties at the
    maximum resolve to the lowest index.  ``map_fn`` may be an
    order-preserving pool map (e.g. ``ThreadPoolExecutor.map``) to spread
    per-sample scoring across workers; results match the builtin ``map``
    exactly because samples are scored independently and gathered in order.
    """
    if pooling is None:
        pooling = PoolingWeights.default_stencil()
    if model is None:
        model = FixedNoise(0.5)
    x_arr = as_float_image(x)
    if x_arr.shape[0] != x_arr.shape[1]:
        raise ValueError(f"training patch must be square, got {x_arr.shape}")
    side = x_arr.shape[0]
    y_arr = as_float_image(y)
    h, w = y_arr.shape
    train_polar = to_polar(compute_gradient(GrayImage(x_arr)))
    model = bind_to_patch(model, train_polar)
    candidates = [g for g in sample_group(scheme, y_arr) if _window_in_bounds(g, side, h, w)]

    def _score_one(g: GroupElement) -> float | None:
        try:
            return _pooled_score(train_polar, side, y_arr, g, pooling, model)
        except StencilOutOfBoundsError:
            return None

    elements = []
    scores = []
    for g, score in zip(candidates, map_fn(_score_one, candidates)):
        if score is None:
            continue
        elements.append(g)
        scores.append(score)
    if not elements:
        raise ValueError("no group sample keeps the evaluation window inside the image")
    scores = np.asarray(scores, dtype=np.float64)
    best = int(np.argmax(scores))
    return SalResult(tuple(elements), scores, best)
