"""curvelearn: self-supervised representation learning for 1D curves.

Curves are sampled from a 14-kernel Gaussian-process mixture, an encoder is
trained contrastively under topology-inspired augmentations, and the frozen
representations are evaluated on kernel classification, multiple-choice
extrapolation and freeform extrapolation.
"""

from .gp import (
    ALL_FAMILIES,
    CG_FAMILIES,
    SM_FAMILY,
    Grid,
    KernelSpec,
    covariance,
    kernel_value,
    log_marginal_likelihood,
    posterior_mean,
    sample_gp,
    sample_hyperparams,
)

__version__ = "0.1.0"
