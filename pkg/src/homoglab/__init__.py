"""Numerical laboratory for periodic homogenization of stable-like jump operators."""
from .assembly import LatticeBasis, FiberMatrix, assemble_fiber, assemble_first_order, oracle_discrepancy
from .cell import EffectiveModel, effective_model, g_star_closed_form, solve_cell_problem
from .coefficients import (CoefficientTable, ProblemSpec, checked_table, constant_table, fixture_a, fixture_b,
                           mu_effective, validate_coefficient)
from .errors import ConfigError, HomogLabError, NumericalError
from .spectral import eigensystem, rho_fiber, spectral_projector, thresholds
from .sweep import RateReport, SweepConfig, predicted_exponent, rate_experiment
from .symbol import LevySymbol, levy_constant, levy_constant_quadrature

__version__ = "0.1.0"
