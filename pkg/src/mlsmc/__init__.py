"""Multilevel sequential Monte Carlo samplers and normalizing-constant estimators."""
from .allocation import (AllocationPlan, RateParameters, plan_allocation, predicted_cost,
                         single_level_plan)
from .core import (DegeneracyError, LevelModel, LevelRangeError, NumericalDomainError,
                   log_potential, potential)
from .engine import RunRecord, run_mlsmc
from .estimators import (ml_expectation_estimate, relative_error, report,
                         standard_nc_estimate, telescoped_nc_estimate)
from .fem import CoefficientField, EllipticFEM
from .inverse import EllipticInverseProblem, MutationConfig, ObservationSetup
from .oracle import FiniteFkModel

__version__ = "0.1.0"
