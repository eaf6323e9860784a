"""Extended fractional Brownian motion, numerical sewing and regularisation-by-noise experiments."""

from . import errors, experiments, noise, sewing, solver
from .fit import RateEstimate, loglog_fit
from .rng import RngSeed, experiment_seed

__version__ = "0.1.0"
