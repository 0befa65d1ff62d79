"""Scikit-learn style estimators for derivative-based variable selection.

`NVSDRegressor` fits a kernel model whose derivative blocks are pushed to
exact zeros by a structured-sparsity penalty; the set of variables with a
nonzero derivative block is the learned support. `KRLSRegressor` is the
plain (non-sparse) kernel ridge baseline, also used for the two-step
debiasing refit on the selected variables.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .admm import SolveResult, SolverConfig, SolverError, solve
from .kernels import GAUSSIAN, KernelSpec, gaussian_width_heuristic, kernel_matrix
from .operators import (
    DEFAULT_MEMORY_CAP,
    OperatorSet,
    assemble_operators,
    prediction_matrix,
)
from .prox import ElasticNet, GroupLasso, GroupStructure, Lasso, Regularizer

REGULARIZER_NAMES = ("lasso", "group_lasso", "elastic_net")


def _resolve_kernel_spec(kernel, width, degree, offset, X=None) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    if kernel == GAUSSIAN:
        if width == "auto":
            if X is None:
                raise ValueError("width='auto' requires training data")
            width = gaussian_width_heuristic(X)
        return KernelSpec.gaussian(float(width))
    if kernel == "polynomial":
        return KernelSpec.polynomial(degree=int(degree), offset=float(offset))
    if kernel == "linear":
        return KernelSpec.linear()
    raise ValueError(f"unknown kernel {kernel!r}")


def _resolve_regularizer(regularizer, groups, mu, d: int) -> Regularizer:
    if isinstance(regularizer, (Lasso, GroupLasso, ElasticNet)):
        return regularizer
    if regularizer == "lasso":
        return Lasso()
    if regularizer == "group_lasso":
        if groups is None:
            raise ValueError("group_lasso requires a group structure")
        if not isinstance(groups, GroupStructure):
            groups = GroupStructure.from_lists(groups, d)
        return GroupLasso(groups)
    if regularizer == "elastic_net":
        return ElasticNet(float(mu))
    raise ValueError(
        f"unknown regularizer {regularizer!r}; expected one of {REGULARIZER_NAMES}"
    )


def _fit_transforms(X, y, normalize: bool):
    """Per-feature z-scoring and target centering (identity when disabled)."""
    d = X.shape[1]
    if not normalize:
        return np.zeros(d), np.ones(d), 0.0
    x_offset = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    return x_offset, x_scale, float(y.mean())


class NVSDRegressor(RegressorMixin, BaseEstimator):
    """Nonlinear regression with derivative-based variable selection.

    Parameters
    ----------
    kernel : {"gaussian", "polynomial", "linear"}
    width : float or "auto"
        Gaussian kernel width; "auto" uses the pooled nearest-neighbor
        median distance heuristic on the (normalized) training inputs.
    degree, offset : polynomial kernel hyperparameters.
    regularizer : {"lasso", "group_lasso", "elastic_net"}
    groups : sequence of sequences of 0-based column indices (group lasso).
    mu : elastic-net mix in [0, 1]; 1 recovers the lasso penalty.
    tau : sparsity strength.
    nu : Hilbert-norm ridge weight.
    normalize : z-score inputs and center targets before fitting; the
        transforms are stored and undone at prediction time.
    warm_start : reuse the previous solver state when refitting.

    Attributes (after fit)
    ----------------------
    alpha_, beta_ : coefficients of the kernel sections and of the kernel
        partial-derivative sections centered at the training points.
    support_ : 0-based indices of variables with nonzero derivative norm.
    derivative_norms_ : per-variable empirical derivative norms.
    """

    def __init__(
        self,
        kernel="gaussian",
        width="auto",
        degree=3,
        offset=1.0,
        regularizer="lasso",
        groups=None,
        mu=0.5,
        tau=1.0,
        nu=1e-4,
        normalize=False,
        kappa_init=1.0,
        abs_tol=1e-6,
        rel_tol=1e-4,
        max_iter=2000,
        s1_mode="exact",
        fold_en_quadratic=True,
        warm_start=False,
        memory_cap=DEFAULT_MEMORY_CAP,
    ):
        self.kernel = kernel
        self.width = width
        self.degree = degree
        self.offset = offset
        self.regularizer = regularizer
        self.groups = groups
        self.mu = mu
        self.tau = tau
        self.nu = nu
        self.normalize = normalize
        self.kappa_init = kappa_init
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.max_iter = max_iter
        self.s1_mode = s1_mode
        self.fold_en_quadratic = fold_en_quadratic
        self.warm_start = warm_start
        self.memory_cap = memory_cap

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            tau=float(self.tau),
            nu=float(self.nu),
            kappa_init=float(self.kappa_init),
            abs_tol=float(self.abs_tol),
            rel_tol=float(self.rel_tol),
            max_iter=int(self.max_iter),
            s1_mode=self.s1_mode,
            fold_en_quadratic=bool(self.fold_en_quadratic),
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 training instances")
        y = y.astype(float)
        self.n_features_in_ = X.shape[1]
        x_offset, x_scale, y_offset = _fit_transforms(X, y, self.normalize)
        Xn = (X - x_offset) / x_scale
        yn = y - y_offset
        spec = _resolve_kernel_spec(
            self.kernel, self.width, self.degree, self.offset, Xn
        )
        reg = _resolve_regularizer(self.regularizer, self.groups, self.mu, X.shape[1])
        ops = assemble_operators(spec, Xn, memory_cap_bytes=self.memory_cap)
        warm = self.solver_state_ if (self.warm_start and hasattr(self, "solver_state_")) else None
        result = solve(ops, yn, reg, self._solver_config(), warm_start=warm)
        self._store_solution(Xn, spec, reg, result, x_offset, x_scale, y_offset)
        return self

    def _store_solution(
        self,
        Xn: np.ndarray,
        spec: KernelSpec,
        reg: Regularizer,
        result: SolveResult,
        x_offset: np.ndarray,
        x_scale: np.ndarray,
        y_offset: float,
    ):
        self.n_features_in_ = Xn.shape[1]
        self.X_fit_ = Xn
        self.kernel_spec_ = spec
        self.width_ = spec.width if spec.family == GAUSSIAN else None
        self.regularizer_ = reg
        self.x_offset_ = x_offset
        self.x_scale_ = x_scale
        self.y_offset_ = y_offset
        self.alpha_ = result.alpha.copy()
        self.beta_ = result.beta.copy()
        self.support_ = result.support.copy()
        self.derivative_norms_ = result.derivative_norms.copy()
        self.objective_ = result.objective
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.solver_state_ = result.state
        self.solve_result_ = result

    @property
    def omega_(self) -> np.ndarray:
        return np.concatenate([self.alpha_, self.beta_])

    def _transform_query(self, X) -> np.ndarray:
        X = check_array(X, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, model was fitted with "
                f"{self.n_features_in_}"
            )
        return (X - self.x_offset_) / self.x_scale_

    def predict(self, X):
        check_is_fitted(self, "alpha_")
        Xq = self._transform_query(X)
        P = prediction_matrix(self.kernel_spec_, self.X_fit_, Xq)
        return P @ self.omega_ + self.y_offset_


def apply_prediction_operator(model, P: np.ndarray) -> np.ndarray:
    """Predictions from a precomputed operator (rows = query points)."""
    return P @ model.omega_ + model.y_offset_


def _solve_ridge_system(K: np.ndarray, shift: float, y: np.ndarray) -> np.ndarray:
    """Solve (K + shift I) alpha = y with escalating jitter on failure."""
    n = K.shape[0]
    scale = max(float(np.trace(K)) / n, np.finfo(float).tiny)
    eps = 0.0
    while True:
        M = K.copy()
        M[np.diag_indices_from(M)] += shift + eps * scale
        try:
            return cho_solve(cho_factor(M, lower=True), y)
        except LinAlgError:
            eps = 1e-10 if eps == 0.0 else eps * 10.0
            if eps > 1e-6:
                raise SolverError("ridge system is singular beyond jitter") from None


class KRLSRegressor(RegressorMixin, BaseEstimator):
    """Kernel regularized least squares: alpha = (K + n nu I)^-1 y.

    ``feature_indices`` restricts the kernel to a subset of input columns
    while still accepting full-width inputs at predict time; this is how
    the debiasing refit ignores unselected variables. An empty selection
    degenerates to the constant training-mean predictor.
    """

    def __init__(
        self,
        kernel="gaussian",
        width="auto",
        degree=3,
        offset=1.0,
        nu=1e-4,
        normalize=False,
        feature_indices=None,
    ):
        self.kernel = kernel
        self.width = width
        self.degree = degree
        self.offset = offset
        self.nu = nu
        self.normalize = normalize
        self.feature_indices = feature_indices

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        y = y.astype(float)
        self.n_features_in_ = X.shape[1]
        if self.feature_indices is None:
            idx = np.arange(X.shape[1])
        else:
            idx = np.asarray(self.feature_indices, dtype=int)
        self.feature_indices_ = idx
        self.support_ = idx.copy()
        Xs = X[:, idx]
        if idx.size == 0:
            self.constant_ = float(y.mean())
            self.alpha_ = np.zeros(0)
            self.X_fit_ = Xs
            self.x_offset_ = np.zeros(0)
            self.x_scale_ = np.ones(0)
            self.y_offset_ = 0.0
            self.kernel_spec_ = None
            return self
        x_offset, x_scale, y_offset = _fit_transforms(Xs, y, self.normalize)
        Xn = (Xs - x_offset) / x_scale
        spec = _resolve_kernel_spec(self.kernel, self.width, self.degree, self.offset, Xn)
        K = kernel_matrix(spec, Xn)
        n = Xn.shape[0]
        self.alpha_ = _solve_ridge_system(K, n * float(self.nu), y - y_offset)
        self.constant_ = None
        self.X_fit_ = Xn
        self.x_offset_ = x_offset
        self.x_scale_ = x_scale
        self.y_offset_ = y_offset
        self.kernel_spec_ = spec
        return self

    def predict(self, X):
        check_is_fitted(self, "feature_indices_")
        X = check_array(X, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, model was fitted with "
                f"{self.n_features_in_}"
            )
        if self.feature_indices_.size == 0:
            return np.full(X.shape[0], self.constant_)
        Xq = (X[:, self.feature_indices_] - self.x_offset_) / self.x_scale_
        Kq = kernel_matrix(self.kernel_spec_, Xq, self.X_fit_)
        return Kq @ self.alpha_ + self.y_offset_


def debias(model: NVSDRegressor, X, y, nu: float | None = None) -> KRLSRegressor:
    """Refit a non-sparse kernel ridge model on the selected variables.

    The returned model keeps the sparse model's support and kernel (with
    the already-resolved Gaussian width) and predicts the training-target
    mean when the support is empty.
    """
    check_is_fitted(model, "support_")
    width = model.width_ if model.width_ is not None else model.width
    krls = KRLSRegressor(
        kernel=model.kernel,
        width=width,
        degree=model.degree,
        offset=model.offset,
        nu=model.nu if nu is None else nu,
        normalize=model.normalize,
        feature_indices=np.asarray(model.support_, dtype=int),
    )
    return krls.fit(X, y)
