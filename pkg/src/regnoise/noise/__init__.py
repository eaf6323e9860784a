"""Extended-scale fractional Brownian motion: sampling, conditioning, regularity."""

from .conditional import (
    c_of_H,
    conditional_mean,
    conditional_mean_levels,
    conditional_mean_via_remainder,
    conditional_remainder_exact,
    conditional_remainder_path,
    kernel_normaliser,
    remainder_weights,
)
from .generate import (
    gen_base_fbm_exact,
    gen_mvn_fbm,
    iterated_integrals,
    lift,
    mvn_from_increments,
    mvn_variance,
    sample_path,
)
from .holder import (
    holder_norm_path,
    holder_seminorm,
    holder_seminorm_info,
    split_exponent,
    stopping_index,
    stopping_time_tau_K,
)
from .io import read_path_csv, write_path_csv
from .types import Hurst, MultiLevelPath, MvnSimulation, TimeGrid, validate_hurst
