"""Order-driven market simulation and recurrence-interval analysis of its returns."""

__version__ = "0.1.0"

from .errors import (BookStateError, EmptyIntervalsError, FitError, ParameterError,
                     SimulationError)
from .lob import BUY, SELL, OrderBook
from .recurrence import (extract_intervals, fit_generalized_gamma, gamma_pdf, pool_and_scale,
                         scaled_pdf)
from .regression import fit_beta_surface
from .scaling import dfa, mfdfa, singularity_width
from .simulator import ModelParams, run_simulation, standardize
from .stochastic import StudentParams, aaft_correlate, gen_fgn, gen_order_signs

__all__ = [
    "__version__",
    "BookStateError", "EmptyIntervalsError", "FitError", "ParameterError", "SimulationError",
    "BUY", "SELL", "OrderBook",
    "extract_intervals", "fit_generalized_gamma", "gamma_pdf", "pool_and_scale", "scaled_pdf",
    "fit_beta_surface",
    "dfa", "mfdfa", "singularity_width",
    "ModelParams", "run_simulation", "standardize",
    "StudentParams", "aaft_correlate", "gen_fgn", "gen_order_signs",
]
