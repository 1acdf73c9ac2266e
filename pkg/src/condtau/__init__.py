"""Equality tests for conditional Kendall's tau across conditioning boxes."""

__version__ = "0.1.0"

from .data import (Box, BoxFamily, CodeSet, Interval, Pair, Sample, box_family_from_config,
                   category_family, interval_family, load_sample, members, overlap_fraction,
                   pair_list, quantile_family)
from .errors import (CondTauError, CoverageError, DegenerateBoxError, IngestionError,
                     InsufficientSubsampleError, NumericalError, SingularMatrixError,
                     ValidationError)
from .estimators import TauEstimates, d_hat, kendall_tau, tau_matrix, tau_pair_box
from .covariance import CovarianceEstimate, delta_hat, i_hat, j_hat
