"""Scikit-learn style facades over the functional core.

Thin adapters only: parameters are stored verbatim at construction,
``fit`` resolves them into concrete objects, and the transform/predict
methods delegate to the plain functions.  Everything remains reachable
without these classes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .contrast import FixedNoise, JointNormalizedNoise, ProportionalNoise, likelihood_curve
from .descriptors import OrientationHistogram, SiftParams, clamp_normalize, sift_descriptor
from .sal import AdaptiveScheme, RegularScheme, sal_likelihood

__all__ = ["ContrastMarginalDensity", "SiftDescriptorExtractor", "SalMatcher"]

_NOISE_FACTORIES = {
    "fixed": FixedNoise,
    "proportional": ProportionalNoise,
    "joint": JointNormalizedNoise,
}


class ContrastMarginalDensity(TransformerMixin, BaseEstimator):
    """Maps gradient observations to orientation likelihood curves.

    Each input row is a polar gradient ``(beta, gamma)``; the output row is
    the contrast-marginalized density sampled on a regular ``n_grid`` angle
    grid over ``[-pi, pi)``.
    """

    def __init__(self, noise: str = "fixed", eps: float = 0.5, n_grid: int = 360):
        self.noise = noise
        self.eps = eps
        self.n_grid = n_grid

    def fit(self, X=None, y=None):
        if self.noise not in _NOISE_FACTORIES:
            raise ValueError(f"unknown noise model {self.noise!r}")
        self.model_ = _NOISE_FACTORIES[self.noise](self.eps)
        self.n_features_in_ = 2
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError(f"expected (n_samples, 2) gradient pairs, got {X.shape}")
        out = np.empty((X.shape[0], self.n_grid), dtype=np.float64)
        for i, (beta, gamma) in enumerate(X):
            out[i] = likelihood_curve((beta, gamma), self.model_, n_grid=self.n_grid).values
        return out

    def angle_grid(self) -> np.ndarray:
        check_is_fitted(self, "model_")
        return likelihood_curve((0.0, 1.0), self.model_, n_grid=self.n_grid).alphas


class SiftDescriptorExtractor(TransformerMixin, BaseEstimator):
    """Maps square patches to flattened orientation-histogram descriptors.

    ``tau`` of ``None`` leaves raw (contrast-covariant) descriptors; a
    fraction in ``(0, 1]`` clamp-normalizes every cell histogram.
    """

    def __init__(
        self,
        bins: int = 8,
        grid: int = 4,
        kernel: str = "bilinear",
        epsilon: float | None = None,
        spatial: str = "gaussian",
        spatial_sigma: float | None = None,
        tau: float | None = None,
    ):
        self.bins = bins
        self.grid = grid
        self.kernel = kernel
        self.epsilon = epsilon
        self.spatial = spatial
        self.spatial_sigma = spatial_sigma
        self.tau = tau

    def fit(self, X=None, y=None):
        self.params_ = SiftParams(
            bins=self.bins,
            grid=self.grid,
            kernel=self.kernel,
            epsilon=self.epsilon,
            spatial=self.spatial,
            spatial_sigma=self.spatial_sigma,
        )
        if self.tau is not None and not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        patches = [np.asarray(p, dtype=np.float64) for p in X]
        if not patches:
            return np.empty((0, self.grid * self.grid * self.bins), dtype=np.float64)
        rows = []
        for patch in patches:
            desc = sift_descriptor(patch, self.params_)
            grid = desc.grid
            if self.tau is not None:
                grid = np.stack(
                    [
                        np.stack(
                            [
                                clamp_normalize(
                                    OrientationHistogram(grid[i, j]), tau_frac=self.tau
                                ).mass
                                for j in range(grid.shape[1])
                            ]
                        )
                        for i in range(grid.shape[0])
                    ]
                )
            rows.append(grid.reshape(-1))
        return np.stack(rows)


class SalMatcher(BaseEstimator):
    """Fits a template patch, then predicts its pose in query images.

    ``predict`` returns one ``(tx, ty, s)`` row per image: the
    translation-scale element maximizing the pooled anti-aliased
    likelihood over the sampling scheme.
    """

    def __init__(
        self,
        stride: int = 2,
        scale_steps: int = 1,
        scale_base: float = 1.1,
        eps: float = 0.5,
        scheme: str = "regular",
        max_samples: int = 64,
    ):
        self.stride = stride
        self.scale_steps = scale_steps
        self.scale_base = scale_base
        self.eps = eps
        self.scheme = scheme
        self.max_samples = max_samples

    def fit(self, X, y=None):
        template = np.asarray(X, dtype=np.float64)
        if template.ndim != 2:
            raise ValueError(f"template must be a 2-D patch, got shape {template.shape}")
        if self.scheme == "regular":
            self.scheme_ = RegularScheme(
                stride=self.stride,
                scale_steps=self.scale_steps,
                scale_base=self.scale_base,
            )
        elif self.scheme == "adaptive":
            self.scheme_ = AdaptiveScheme(max_samples=self.max_samples)
        else:
            raise ValueError(f"unknown sampling scheme {self.scheme!r}")
        self.template_ = template.copy()
        self.model_ = FixedNoise(self.eps)
        return self

    def _results(self, X):
        check_is_fitted(self, "template_")
        images = [np.asarray(img, dtype=np.float64) for img in X]
        return [
            sal_likelihood(self.template_, img, self.scheme_, model=self.model_)
            for img in images
        ]

    def predict(self, X) -> np.ndarray:
        results = self._results(X)
        return np.array([[r.best.tx, r.best.ty, r.best.s] for r in results], dtype=np.float64)

    def score_samples(self, X) -> np.ndarray:
        results = self._results(X)
        return np.array([r.best_score for r in results], dtype=np.float64)
