"""Smoothing-spline instrumental-variable regression.

One-step estimation of a nonparametric regression with an endogenous
regressor: a characteristic-function moment criterion over the instruments
is minimized jointly with a roughness penalty, the solution being a natural
cubic spline with a closed-form coefficient system.  The package adds
derivative estimation, 2-fold cross-validated regularization, a
monotonicity-constrained variant via observation-weight tilting, and a
Monte Carlo harness.
"""

__version__ = "0.1.0"

from .datamodel import Dataset, StandardizedInstruments, load_csv, standardize_instruments, write_csv
from .errors import (
    CollinearityError,
    ConditioningError,
    DegenerateInstrumentError,
    InfeasibleConstraintsError,
    IvsplineError,
    ParseError,
    SchemaError,
    SelectionError,
    SingularKernelError,
    SizeError,
    SolverStallError,
)
from .kernel import (
    KernelSpec,
    WeightMatrix,
    build_omega,
    build_weight_matrix,
    kernel_weight,
    moment_criterion,
)
from .monotone import MonotoneDirection, TiltWeights, derivative_smoother_matrix, fit_monotone, tilt
from .selection import CvConfig, CvResult, cross_validate, default_grid
from .simlab import DgpConfig, McReport, evaluation_grid, generate, monte_carlo, true_function
from .solver import BlockSystem, PathSolver, build_block_system, fit, fitted_values, hat_diagnostics
from .spline import (
    DesignMatrices,
    SplineFit,
    build_design,
    evaluate,
    evaluate_derivative,
    evaluate_second_derivative,
    roughness,
)

__all__ = [
    "__version__",
    "Dataset",
    "StandardizedInstruments",
    "load_csv",
    "standardize_instruments",
    "write_csv",
    "KernelSpec",
    "WeightMatrix",
    "build_omega",
    "build_weight_matrix",
    "kernel_weight",
    "moment_criterion",
    "DesignMatrices",
    "SplineFit",
    "build_design",
    "evaluate",
    "evaluate_derivative",
    "evaluate_second_derivative",
    "roughness",
    "BlockSystem",
    "PathSolver",
    "build_block_system",
    "fit",
    "fitted_values",
    "hat_diagnostics",
    "CvConfig",
    "CvResult",
    "cross_validate",
    "default_grid",
    "MonotoneDirection",
    "TiltWeights",
    "derivative_smoother_matrix",
    "fit_monotone",
    "tilt",
    "DgpConfig",
    "McReport",
    "evaluation_grid",
    "generate",
    "monte_carlo",
    "true_function",
    "IvsplineError",
    "SchemaError",
    "ParseError",
    "SizeError",
    "DegenerateInstrumentError",
    "CollinearityError",
    "SingularKernelError",
    "ConditioningError",
    "SelectionError",
    "InfeasibleConstraintsError",
    "SolverStallError",
]
