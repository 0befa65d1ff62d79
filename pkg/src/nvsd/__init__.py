"""Nonlinear variable selection with derivative-based structured sparsity.

Regression in a reproducing kernel Hilbert space where the penalty acts on
the empirical norms of the model's partial derivatives, so that whole input
variables (or groups of them) are switched off exactly. Fitting is done by
ADMM with closed-form proximal steps; the support is read off the zero
blocks of the auxiliary variable.
"""
from .admm import (
    S1System,
    SolveResult,
    SolverConfig,
    SolverError,
    SolverState,
    objective_value,
    solve,
    step_size_update,
)
from .bench import BenchConfig, ExperimentResult, MethodSpec, run_experiment
from .datasets import SyntheticDataset, gen_e1, gen_e2, gen_e3
from .estimators import (
    KRLSRegressor,
    NVSDRegressor,
    apply_prediction_operator,
    debias,
)
from .kernels import (
    KernelSpec,
    gaussian_width_heuristic,
    kernel_cross_hessian,
    kernel_eval,
    kernel_grad1,
    kernel_matrix,
)
from .metrics import rmse, tanimoto_distance
from .operators import OperatorSet, assemble_operators, prediction_matrix
from .path import (
    PathResult,
    auto_tau_grid,
    fit_path,
    select_by_refit_validation,
    select_by_validation,
)
from .prox import (
    ElasticNet,
    GroupLasso,
    GroupStructure,
    Lasso,
    partial_derivative_norms,
    prox_elastic_net,
    prox_group_lasso,
    prox_lasso,
    regularizer_value,
)
from .serialize import load_model, model_from_dict, model_to_dict, save_model

__version__ = "0.1.0"

__all__ = [
    "BenchConfig",
    "ElasticNet",
    "ExperimentResult",
    "GroupLasso",
    "GroupStructure",
    "KRLSRegressor",
    "KernelSpec",
    "Lasso",
    "MethodSpec",
    "NVSDRegressor",
    "OperatorSet",
    "PathResult",
    "S1System",
    "SolveResult",
    "SolverConfig",
    "SolverError",
    "SolverState",
    "SyntheticDataset",
    "apply_prediction_operator",
    "assemble_operators",
    "auto_tau_grid",
    "debias",
    "fit_path",
    "gaussian_width_heuristic",
    "gen_e1",
    "gen_e2",
    "gen_e3",
    "kernel_cross_hessian",
    "kernel_eval",
    "kernel_grad1",
    "kernel_matrix",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "objective_value",
    "partial_derivative_norms",
    "prediction_matrix",
    "prox_elastic_net",
    "prox_group_lasso",
    "prox_lasso",
    "regularizer_value",
    "rmse",
    "run_experiment",
    "save_model",
    "select_by_refit_validation",
    "select_by_validation",
    "solve",
    "step_size_update",
    "tanimoto_distance",
]
