"""Monte Carlo harnesses producing measured slopes, ratios and identity residuals."""

from ..fit import RateEstimate, loglog_fit
from .report import ExperimentReport, write_report
from .semigroup import component, gaussian_semigroup_apply, heat_kernel_probe, semigroup_identity_experiment
from .sewing_demo import ito_germ, left_point_germ, random_regular_partition, sewing_demo_experiment, square_germ
from .solver_runs import (
    SCAN_HEADER,
    contraction_rate_experiment,
    expansion_rate_experiment,
    threshold_scan,
    uniqueness_probe,
)
from .variance import variance_identity_experiment
