"""Minimal-sufficient invariant representations of image patches.

The package computes closed-form contrast-marginalized orientation
likelihoods, relates them to clamped orientation-histogram descriptors
and rectified oriented filters, scores translation-scale poses with a
sampled anti-aliased likelihood, and verifies layered evaluation
identities on small discrete models.  ``invdesc.estimators`` adds
scikit-learn style wrappers; the ``invdesc`` console script runs the
bundled experiments.
"""

from .contrast import (
    DegeneratePatchError,
    FixedNoise,
    JointNormalizedNoise,
    LikelihoodCurve,
    NoiseModel,
    ProportionalNoise,
    bind_to_patch,
    contrast_marginal,
    likelihood_curve,
    marginal_by_quadrature,
    patch_log_likelihood,
    patch_mean_curve,
)
from .descriptors import (
    AngularGaussianKernel,
    BilinearKernel,
    OrientationHistogram,
    RectifiedCosinePowerKernel,
    SiftDescriptor,
    SiftParams,
    TildeGaussianKernel,
    accumulate_histogram,
    clamp_normalize,
    dominant_orientations,
    dsp_sift_descriptor,
    sift_descriptor,
    sift_integrand,
)
from .estimators import ContrastMarginalDensity, SalMatcher, SiftDescriptorExtractor
from .hierarchy import (
    ToyLayeredModel,
    direct_marginal,
    layered_marginal,
    make_random_model,
    shift_signal,
)
from .image import (
    GradientField,
    GrayImage,
    Patch,
    PolarGradient,
    compute_gradient,
    extract_patch,
    load_image,
    to_polar,
    wrap_angle,
)
from .relufilters import (
    equivalence_report,
    histogram_response,
    kernel_sup_distances,
    linear_response,
    oriented_filter,
    partition_regions,
    relu_response,
    two_edge_band,
)
from .rngstreams import stream_rng
from .sal import (
    AdaptiveScheme,
    GroupElement,
    PoolingWeights,
    RegularScheme,
    SalResult,
    StencilOutOfBoundsError,
    antialiased_score,
    apply_group,
    sal_likelihood,
    sample_group,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveScheme",
    "AngularGaussianKernel",
    "BilinearKernel",
    "ContrastMarginalDensity",
    "DegeneratePatchError",
    "FixedNoise",
    "GradientField",
    "GrayImage",
    "GroupElement",
    "JointNormalizedNoise",
    "LikelihoodCurve",
    "NoiseModel",
    "OrientationHistogram",
    "Patch",
    "PolarGradient",
    "PoolingWeights",
    "ProportionalNoise",
    "RectifiedCosinePowerKernel",
    "RegularScheme",
    "SalMatcher",
    "SalResult",
    "SiftDescriptor",
    "SiftDescriptorExtractor",
    "SiftParams",
    "StencilOutOfBoundsError",
    "TildeGaussianKernel",
    "ToyLayeredModel",
    "accumulate_histogram",
    "antialiased_score",
    "apply_group",
    "bind_to_patch",
    "clamp_normalize",
    "compute_gradient",
    "contrast_marginal",
    "direct_marginal",
    "dominant_orientations",
    "dsp_sift_descriptor",
    "equivalence_report",
    "extract_patch",
    "histogram_response",
    "kernel_sup_distances",
    "layered_marginal",
    "likelihood_curve",
    "linear_response",
    "load_image",
    "make_random_model",
    "marginal_by_quadrature",
    "oriented_filter",
    "partition_regions",
    "patch_log_likelihood",
    "patch_mean_curve",
    "relu_response",
    "sal_likelihood",
    "sample_group",
    "shift_signal",
    "sift_descriptor",
    "sift_integrand",
    "stream_rng",
    "to_polar",
    "two_edge_band",
    "wrap_angle",
    "__version__",
]
