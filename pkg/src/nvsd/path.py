"""Regularization paths with warm starts and validation-based selection.

A path solves the problem over a descending grid of sparsity strengths,
reusing the previous solution (and the cached S1 factorizations) at each
step. The top of the grid is calibrated so that the very first solve has
an empty support; the grid then spans a fixed number of decades downward.
For the elastic net an outer loop over the mix parameter mu is added and
the grid top is made large enough for every mu in the grid.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .admm import S1System, SolverConfig, solve
from .estimators import (
    NVSDRegressor,
    _fit_transforms,
    _resolve_kernel_spec,
    _resolve_regularizer,
    _solve_ridge_system,
    apply_prediction_operator,
)
from .operators import (
    DEFAULT_MEMORY_CAP,
    OperatorSet,
    assemble_operators,
    prediction_matrix,
)
from .prox import ElasticNet, GroupLasso, Regularizer

DEFAULT_MU_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
_MAX_TAU_DOUBLINGS = 60


@dataclass
class PathEntry:
    tau: float
    mu: float | None
    model: NVSDRegressor
    iterations: int
    converged: bool


@dataclass
class PathResult:
    tau_grid: np.ndarray
    entries: list[PathEntry]
    validation_mse: np.ndarray | None = None
    best_index: int | None = None
    ops: OperatorSet | None = None

    @property
    def models(self) -> list[NVSDRegressor]:
        return [e.model for e in self.entries]

    def total_iterations(self) -> int:
        return sum(e.iterations for e in self.entries)


def _ridge_block_norms(ops: OperatorSet, y: np.ndarray, nu: float) -> np.ndarray:
    """Per-variable norms ||Z^a omega_ridge|| at the tau = 0 ridge solution."""
    alpha = _solve_ridge_system(ops.K, ops.n * nu, y)
    z = (ops.D @ alpha).reshape(ops.d, ops.n)
    return np.sqrt(np.einsum("ij,ij->i", z, z))


def _tau_max_estimate(ops: OperatorSet, y: np.ndarray, reg: Regularizer, nu: float) -> float:
    norms = _ridge_block_norms(ops, y, nu)
    base = 2.0 / (ops.n * np.sqrt(ops.n))
    if isinstance(reg, GroupLasso):
        units = [
            base * np.sqrt(np.sum(norms[list(g)] ** 2)) / len(g)
            for g in reg.groups.groups
        ]
        estimate = max(units)
    elif isinstance(reg, ElasticNet):
        if reg.mu <= 0:
            raise ValueError("elastic net with mu = 0 never produces sparsity")
        estimate = base * norms.max() / reg.mu
    else:
        estimate = base * norms.max()
    return 2.0 * float(estimate)


def _verified_tau_max(
    ops: OperatorSet,
    y: np.ndarray,
    reg: Regularizer,
    config: SolverConfig,
    system: S1System,
    tau_start: float,
) -> float:
    tau = tau_start
    for _ in range(_MAX_TAU_DOUBLINGS):
        result = solve(ops, y, reg, replace(config, tau=tau), system=system)
        if result.support.size == 0:
            return tau
        tau *= 2.0
    raise ValueError("could not find a tau that empties the support")


def auto_tau_grid(
    ops: OperatorSet,
    y: np.ndarray,
    reg: Regularizer,
    nu: float = 1e-4,
    count: int = 50,
    decades: float = 3.0,
    config: SolverConfig | None = None,
    system: S1System | None = None,
) -> np.ndarray:
    """Descending log-spaced grid whose top value yields an empty support."""
    y = np.asarray(y, dtype=float)
    if count < 2:
        raise ValueError("count must be >= 2")
    if np.ptp(y) == 0.0:
        raise ValueError("degenerate targets: all values equal")
    if config is None:
        config = SolverConfig(tau=1.0, nu=nu, fold_en_quadratic=False)
    if system is None:
        system = S1System(ops, config.nu)
    tau_max = _verified_tau_max(
        ops, y, reg, config, system, _tau_max_estimate(ops, y, reg, nu)
    )
    top = np.log10(tau_max)
    return np.logspace(top, top - decades, count)


def fit_path(
    X,
    y,
    kernel="gaussian",
    width="auto",
    degree=3,
    offset=1.0,
    regularizer="lasso",
    groups=None,
    nu: float = 1e-4,
    config: SolverConfig | None = None,
    tau_grid=None,
    tau_count: int = 50,
    tau_decades: float = 3.0,
    mu_grid=None,
    normalize: bool = False,
    warm_start: bool = True,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    ops: OperatorSet | None = None,
) -> PathResult:
    """Fit models over a descending tau grid (times a mu grid for the
    elastic net), warm-starting each solve from the previous one.

    The elastic-net quadratic term is handled by the direct proximal route
    here so that one cached S1 factorization serves the entire grid.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x_offset, x_scale, y_offset = _fit_transforms(X, y, normalize)
    Xn = (X - x_offset) / x_scale
    yn = y - y_offset
    spec = _resolve_kernel_spec(kernel, width, degree, offset, Xn)
    if ops is None:
        ops = assemble_operators(spec, Xn, memory_cap_bytes=memory_cap)
    base_reg = _resolve_regularizer(regularizer, groups, 0.5, X.shape[1])
    if config is None:
        config = SolverConfig(tau=1.0, nu=nu)
    config = replace(config, nu=nu, fold_en_quadratic=False)
    system = S1System(ops, config.nu)

    if isinstance(base_reg, ElasticNet):
        mus = tuple(mu_grid) if mu_grid is not None else DEFAULT_MU_GRID
        regs = [ElasticNet(mu) for mu in mus]
    else:
        regs = [base_reg]

    if tau_grid is None:
        tau_max = max(
            _verified_tau_max(
                ops, yn, reg, config, system, _tau_max_estimate(ops, yn, reg, nu)
            )
            for reg in regs
        )
        top = np.log10(tau_max)
        grid = np.logspace(top, top - tau_decades, tau_count)
    else:
        grid = np.asarray(tau_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) >= 0):
            raise ValueError("tau_grid must be strictly decreasing")

    entries: list[PathEntry] = []
    for reg in regs:
        state = None
        mu = reg.mu if isinstance(reg, ElasticNet) else None
        for tau in grid:
            result = solve(
                ops,
                yn,
                reg,
                replace(config, tau=float(tau)),
                warm_start=state if warm_start else None,
                system=system,
            )
            state = result.state
            model = NVSDRegressor(
                kernel=kernel,
                width=width,
                degree=degree,
                offset=offset,
                regularizer=regularizer,
                groups=groups,
                mu=mu if mu is not None else 0.5,
                tau=float(tau),
                nu=nu,
                normalize=normalize,
            )
            model._store_solution(Xn, spec, reg, result, x_offset, x_scale, y_offset)
            entries.append(
                PathEntry(
                    tau=float(tau),
                    mu=mu,
                    model=model,
                    iterations=result.iterations,
                    converged=result.converged,
                )
            )
    return PathResult(tau_grid=grid, entries=entries, ops=ops)


def _pick_best(path: PathResult, mses: np.ndarray) -> int:
    """Smallest MSE; exact ties go to the larger (sparser) tau."""
    best = 0
    for i in range(1, len(path.entries)):
        if mses[i] < mses[best]:
            best = i
        elif mses[i] == mses[best] and path.entries[i].tau > path.entries[best].tau:
            best = i
    return best


def select_by_validation(
    path: PathResult,
    X_val,
    y_val,
    prediction_operator: np.ndarray | None = None,
) -> NVSDRegressor:
    """Pick the path model with minimal validation MSE.

    Exact ties are broken toward the larger (sparser) tau. The computed
    MSEs and the winning index are stored on the path result.
    """
    if not path.entries:
        raise ValueError("empty path")
    y_val = np.asarray(y_val, dtype=float)
    first = path.entries[0].model
    if prediction_operator is None:
        Xq = first._transform_query(X_val)
        prediction_operator = prediction_matrix(first.kernel_spec_, first.X_fit_, Xq)
    mses = np.empty(len(path.entries))
    for i, entry in enumerate(path.entries):
        resid = apply_prediction_operator(entry.model, prediction_operator) - y_val
        mses[i] = float(resid @ resid) / y_val.size
    best = _pick_best(path, mses)
    path.validation_mse = mses
    path.best_index = best
    return path.entries[best].model


def select_by_refit_validation(
    path: PathResult,
    X_train,
    y_train,
    X_val,
    y_val,
    nu: float | None = None,
):
    """Pick the path model whose debiasing refit has minimal validation MSE.

    Every distinct support along the path is refit once with kernel ridge
    on the selected columns; the path point is judged by that refit's
    validation error. This scores a point by the quality of its selected
    variables rather than by its (heavily shrunk) raw coefficients, which
    is what makes hyperparameter selection work for the sparse models.

    Returns (best_path_model, its_refit_model); MSEs and the winning index
    are stored on the path result.
    """
    from .estimators import debias

    if not path.entries:
        raise ValueError("empty path")
    y_val = np.asarray(y_val, dtype=float)
    refits: dict[tuple, tuple[float, object]] = {}
    mses = np.empty(len(path.entries))
    for i, entry in enumerate(path.entries):
        key = tuple(int(a) for a in entry.model.support_)
        if key not in refits:
            refit = debias(entry.model, X_train, y_train, nu=nu)
            resid = refit.predict(X_val) - y_val
            refits[key] = (float(resid @ resid) / y_val.size, refit)
        mses[i] = refits[key][0]
    best = _pick_best(path, mses)
    path.validation_mse = mses
    path.best_index = best
    key = tuple(int(a) for a in path.entries[best].model.support_)
    return path.entries[best].model, refits[key][1]
