"""Parameter estimation against bootstrap-imputed future data with adaptive duality penalties."""

from .core import (
    Dataset,
    DualityKind,
    DualitySpec,
    LambdaNorm,
    ModelSpec,
    NonFiniteError,
    Solution,
    SolverOptions,
    StepRule,
    duality_grad,
    duality_value,
    empirical_grad,
    empirical_loss,
)
from .estimators import AutoModelingRegressor, JamesSteinShrinker, NormalMeansAM
from .imputation import ImputationConfig, ImputationPool, am_estimate, build_pool
from .solver import solve_equilibrium

__version__ = "0.1.0"

__all__ = [
    "AutoModelingRegressor", "Dataset", "DualityKind", "DualitySpec", "ImputationConfig",
    "ImputationPool", "JamesSteinShrinker", "LambdaNorm", "ModelSpec", "NonFiniteError",
    "NormalMeansAM", "Solution", "SolverOptions", "StepRule", "am_estimate", "build_pool",
    "duality_grad", "duality_value", "empirical_grad", "empirical_loss", "solve_equilibrium",
]
