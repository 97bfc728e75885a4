"""Gaussian kernel smoothing of sampled fields, with smoothness and Gaussianness diagnostics."""
from .cli import gaussblur_fwhm
from .convolve import BoundaryMode, convolve_axis, convolve_dense, smooth
from .core import (
    Field,
    Kernel1D,
    SeparableKernel,
    fwhm_to_sigma,
    gaussian_kernel_1d,
    scale_space,
    separable_kernel,
    sigma_to_fwhm,
)
from .smoothness import ResidualEnsemble, edge_efwhm, field_efwhm, normalize_residuals
from .stats import (
    QQCurve,
    SampleSet,
    empirical_cdf,
    exponential_quantile,
    kde,
    normal_probability_plot,
    normal_quantile,
    qq_curve,
    sample_quantile,
)

__version__ = "0.1.0"
