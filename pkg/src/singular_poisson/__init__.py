"""Estimating the location of a power-type singularity of a Poisson intensity."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .model import (  # noqa: E402
    IntensityModel,
    PowerSingularity,
    SmoothPart,
    cumulative_intensity,
    hellinger_F,
    intensity_at,
    total_intensity,
    validate,
)
from .sampler import SampleBatch, sample_batch, sample_path  # noqa: E402
from .likelihood import log_likelihood_ratio, normalized_llr  # noqa: E402
from .estimators import EstimatorConfig, Prior, bayes_estimate, mle_estimate  # noqa: E402
from .limit import LimitConfig, draw_zeta_xi, limit_cf, log_Z  # noqa: E402
