"""ADMM solver for the finite-dimensional variable-selection problem.

The problem in the stacked coefficient vector omega = [alpha; beta] is

    min_omega  (1/n) ||y - F omega||^2  +  tau * J(omega)
               +  nu * omega^T Q omega

with J the lasso / group-lasso / elastic-net penalty applied to the
derivative blocks Z^a omega.  Introducing phi = Z omega splits the smooth
part from the penalty, and each iteration performs

    S1  solve (nu(Q + Q^T) + 2/n F^T F + kappa Z^T Z) omega
              = 2/n F^T y + kappa Z^T (phi - lambda)
    S2  phi    <- prox of the penalty at Z omega + lambda
    S3  lambda <- lambda + Z omega - phi

with lambda the scaled dual variable and kappa the step size.  For the
elastic net the differentiable quadratic part of the penalty is, by
default, folded into the S1 matrix (adding 2 tau (1-mu)/n Z^T Z) so that
S2 reduces to the plain soft threshold at tau*mu; the direct elastic-net
proximal map is kept as an alternative route for cross-checking.

The S1 matrix only changes when kappa (or the folded elastic-net weight)
changes, so its Cholesky factorization is cached and reused across
iterations and, via a shared `S1System`, across warm-started solves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .operators import OperatorSet
from .prox import (
    ElasticNet,
    GroupLasso,
    Lasso,
    Regularizer,
    partial_derivative_norms,
    prox_elastic_net,
    prox_group_lasso,
    prox_lasso,
    regularizer_value,
)

_JITTER_INIT = 1e-10
_JITTER_MAX = 1e-6
_KAPPA_BOUNDS = (1e-12, 1e12)
_TINY = 1e-300


class SolverError(RuntimeError):
    """Numerical failure inside the solver (factorization, divergence)."""


def default_descent_schedule(iteration: int) -> int:
    """Steepest-descent step count for inexact S1: grows with the iteration."""
    return min(5 + math.ceil(iteration / 10), 50)


@dataclass
class SolverConfig:
    tau: float = 1.0
    nu: float = 1e-4
    kappa_init: float = 1.0
    abs_tol: float = 1e-6
    rel_tol: float = 1e-4
    max_iter: int = 2000
    s1_mode: str = "exact"  # "exact" (factorized) or "descent" (inexact)
    s1_descent_schedule: Callable[[int], int] | None = None
    residual_balance: bool = True
    residual_balance_factor: float = 10.0
    residual_balance_scale: float = 2.0
    residual_balance_mode: str = "raw"  # "raw" or "relative"
    fold_en_quadratic: bool = True
    track_objective: bool = False

    def __post_init__(self):
        if self.tau < 0 or self.nu < 0:
            raise ValueError("tau and nu must be >= 0")
        if self.kappa_init <= 0:
            raise ValueError("kappa_init must be > 0")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.s1_mode not in ("exact", "descent"):
            raise ValueError("s1_mode must be 'exact' or 'descent'")
        if self.residual_balance_mode not in ("raw", "relative"):
            raise ValueError("residual_balance_mode must be 'raw' or 'relative'")


@dataclass
class SolverState:
    omega: np.ndarray
    phi: np.ndarray
    lam: np.ndarray
    kappa: float


@dataclass
class SolveResult:
    omega: np.ndarray
    phi: np.ndarray
    support: np.ndarray
    derivative_norms: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual_history: np.ndarray  # (iterations, 2): primal, dual
    kappa_history: np.ndarray
    objective_history: np.ndarray | None
    state: SolverState

    @property
    def alpha(self) -> np.ndarray:
        n = self.omega.size - self.phi.size
        return self.omega[:n]

    @property
    def beta(self) -> np.ndarray:
        n = self.omega.size - self.phi.size
        return self.omega[n:]

    def diagnostics(self) -> dict:
        """JSON-serializable convergence report."""
        out = {
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "objective": float(self.objective),
            "residual_history": self.residual_history.tolist(),
            "kappa_history": self.kappa_history.tolist(),
        }
        if self.objective_history is not None:
            out["objective_history"] = self.objective_history.tolist()
        return out


class S1System:
    """The S1 linear system with a Cholesky cache keyed by the step size.

    The matrix is A + kappa * Z^T Z with A = nu (Q + Q^T) + 2/n F^T F
    (+ the folded elastic-net term when ``extra_ztz`` is nonzero), plus a
    small diagonal jitter scaled by the mean diagonal of the matrix.
    """

    def __init__(self, ops: OperatorSet, nu: float, extra_ztz: float = 0.0):
        self.ops = ops
        self.nu = nu
        self.extra_ztz = extra_ztz
        A = nu * ops.q_sym + (2.0 / ops.n) * ops.ftf
        if extra_ztz:
            A = A + extra_ztz * ops.ztz
        self.A = A
        self._trace_a = float(np.trace(A))
        self._trace_b = float(np.trace(ops.ztz))
        self._factors: dict[float, tuple] = {}
        self._matrices: dict[float, np.ndarray] = {}

    def _trace_scale(self, kappa: float) -> float:
        return (self._trace_a + kappa * self._trace_b) / self.ops.size

    def matrix(self, kappa: float) -> np.ndarray:
        M = self._matrices.get(kappa)
        if M is None:
            M = self.A + kappa * self.ops.ztz
            M[np.diag_indices_from(M)] += _JITTER_INIT * self._trace_scale(kappa)
            if len(self._matrices) > 4:
                self._matrices.pop(next(iter(self._matrices)))
            self._matrices[kappa] = M
        return M

    def _factorize(self, kappa: float) -> tuple:
        scale = self._trace_scale(kappa)
        base = self.A + kappa * self.ops.ztz
        eps = _JITTER_INIT
        while eps <= _JITTER_MAX:
            M = base.copy()
            M[np.diag_indices_from(M)] += eps * scale
            try:
                return cho_factor(M, lower=True, check_finite=False)
            except LinAlgError:
                eps *= 10.0
        raise SolverError(
            f"S1 factorization failed even with jitter {_JITTER_MAX:g} * scale"
        )

    def solve(self, rhs: np.ndarray, kappa: float) -> np.ndarray:
        factor = self._factors.get(kappa)
        if factor is None:
            factor = self._factorize(kappa)
            if len(self._factors) >= 12:
                self._factors.pop(next(iter(self._factors)))
        else:
            del self._factors[kappa]  # re-insert: keep the cache LRU-ordered
        self._factors[kappa] = factor
        return cho_solve(factor, rhs, check_finite=False)

    def descend(self, omega: np.ndarray, rhs: np.ndarray, kappa: float, steps: int) -> np.ndarray:
        """Exact-line-search steepest descent on the S1 quadratic."""
        M = self.matrix(kappa)
        omega = omega.copy()
        for _ in range(steps):
            g = M @ omega - rhs
            Mg = M @ g
            curvature = float(g @ Mg)
            if curvature <= 0.0:
                break
            omega -= (float(g @ g) / curvature) * g
        return omega


def _expected_extra_ztz(reg: Regularizer, config: SolverConfig, n: int) -> float:
    if isinstance(reg, ElasticNet) and config.fold_en_quadratic:
        return 2.0 * config.tau * (1.0 - reg.mu) / n
    return 0.0


def _s2(v: np.ndarray, reg: Regularizer, config: SolverConfig, kappa: float, n: int) -> np.ndarray:
    root_n = np.sqrt(n)
    if isinstance(reg, Lasso):
        return prox_lasso(v, config.tau / (kappa * root_n), n)
    if isinstance(reg, GroupLasso):
        return prox_group_lasso(v, config.tau / (kappa * root_n), reg.groups, n)
    if isinstance(reg, ElasticNet):
        if config.fold_en_quadratic:
            return prox_lasso(v, (config.tau * reg.mu) / (kappa * root_n), n)
        return prox_elastic_net(v, config.tau, reg.mu, kappa, n)
    raise TypeError(f"unknown regularizer {reg!r}")


def s1_update(
    ops: OperatorSet,
    y: np.ndarray,
    config: SolverConfig,
    phi: np.ndarray,
    lam: np.ndarray,
    kappa: float,
    system: S1System | None = None,
    omega_prev: np.ndarray | None = None,
    iteration: int = 1,
) -> np.ndarray:
    """One S1 update (exact factorized solve or scheduled descent steps)."""
    if system is None:
        system = S1System(ops, config.nu)
    rhs = (2.0 / ops.n) * (ops.F.T @ np.asarray(y, dtype=float))
    if kappa != 0.0:
        rhs = rhs + kappa * (ops.Z.T @ (phi - lam))
    if config.s1_mode == "descent":
        schedule = config.s1_descent_schedule or default_descent_schedule
        start = omega_prev if omega_prev is not None else np.zeros(ops.size)
        return system.descend(start, rhs, kappa, schedule(iteration))
    return system.solve(rhs, kappa)


def s3_update(lam: np.ndarray, z_omega: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Scaled dual update: lambda + Z omega - phi."""
    return lam + z_omega - phi


def step_size_update(
    primal_residual: float,
    dual_residual: float,
    kappa: float,
    factor: float = 10.0,
    scale: float = 2.0,
) -> float:
    """Residual-balancing rule: scale kappa toward the lagging residual."""
    if primal_residual > factor * dual_residual:
        return kappa * scale
    if dual_residual > factor * primal_residual:
        return kappa / scale
    return kappa


def objective_value(
    ops: OperatorSet,
    y: np.ndarray,
    reg: Regularizer,
    config: SolverConfig,
    omega: np.ndarray,
) -> float:
    """Full objective at omega (penalty evaluated on the Z omega blocks)."""
    y = np.asarray(y, dtype=float)
    resid = y - ops.F @ omega
    value = float(resid @ resid) / ops.n
    if config.tau:
        value += config.tau * regularizer_value(reg, ops.Z @ omega, ops.n)
    if config.nu:
        value += config.nu * float(omega @ (ops.Q @ omega))
    return value


def _check_reg(reg: Regularizer, d: int) -> None:
    if isinstance(reg, GroupLasso) and reg.groups.d != d:
        raise ValueError(
            f"group structure covers {reg.groups.d} variables, data has {d}"
        )


def solve(
    ops: OperatorSet,
    y: np.ndarray,
    reg: Regularizer,
    config: SolverConfig,
    warm_start: SolverState | None = None,
    system: S1System | None = None,
) -> SolveResult:
    """Run ADMM until the scaled residual criteria or max_iter."""
    y = np.asarray(y, dtype=float)
    n, d, m = ops.n, ops.d, ops.size
    if y.shape != (n,):
        raise ValueError(f"y must have length {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite entries")
    _check_reg(reg, d)

    extra = _expected_extra_ztz(reg, config, n)
    if system is None:
        system = S1System(ops, config.nu, extra)
    elif system.extra_ztz != extra or system.nu != config.nu:
        raise ValueError("shared S1System was built for different nu / penalty terms")

    if warm_start is not None:
        omega = warm_start.omega.copy()
        phi = warm_start.phi.copy()
        lam = warm_start.lam.copy()
        kappa = float(warm_start.kappa)
    else:
        omega = np.zeros(m)
        phi = np.zeros(d * n)
        lam = np.zeros(d * n)
        kappa = config.kappa_init

    schedule = config.s1_descent_schedule or default_descent_schedule
    rhs_const = (2.0 / n) * (ops.F.T @ y)
    Zt = ops.Z.T
    stacked = np.column_stack([phi, lam])
    zt_stack = Zt @ stacked  # columns: Z^T phi, Z^T lambda (one pass over Z)
    zt_phi, zt_lam = zt_stack[:, 0], zt_stack[:, 1]

    residuals: list[tuple[float, float]] = []
    kappas: list[float] = []
    objectives: list[float] = []
    sqrt_dn = np.sqrt(d * n)
    sqrt_m = np.sqrt(m)
    converged = False
    iterations = 0

    for k in range(1, config.max_iter + 1):
        iterations = k
        rhs = rhs_const + kappa * (zt_phi - zt_lam)
        if config.s1_mode == "descent":
            omega = system.descend(omega, rhs, kappa, schedule(k))
        else:
            omega = system.solve(rhs, kappa)
        z_omega = ops.Z @ omega
        phi_new = _s2(z_omega + lam, reg, config, kappa, n)
        lam = s3_update(lam, z_omega, phi_new)

        stacked = np.column_stack([phi_new, lam])
        zt_stack = Zt @ stacked
        zt_phi_new, zt_lam = zt_stack[:, 0], zt_stack[:, 1]
        primal = float(np.linalg.norm(z_omega - phi_new))
        dual = kappa * float(np.linalg.norm(zt_phi_new - zt_phi))
        phi, zt_phi = phi_new, zt_phi_new

        if not (np.isfinite(primal) and np.isfinite(dual)):
            raise SolverError("divergence: non-finite residuals")

        residuals.append((primal, dual))
        kappas.append(kappa)
        if config.track_objective:
            objectives.append(objective_value(ops, y, reg, config, omega))

        primal_scale = max(float(np.linalg.norm(z_omega)), float(np.linalg.norm(phi)))
        dual_scale = kappa * float(np.linalg.norm(zt_lam))
        eps_pri = sqrt_dn * config.abs_tol + config.rel_tol * primal_scale
        eps_dual = sqrt_m * config.abs_tol + config.rel_tol * dual_scale
        if primal <= eps_pri and dual <= eps_dual:
            converged = True
            break

        # a residual that is exactly zero carries no balance information
        # (e.g. phi frozen at zero while the threshold dominates); scaling
        # kappa off it would ratchet the step size without bound
        if config.residual_balance and primal > 0.0 and dual > 0.0:
            if config.residual_balance_mode == "relative":
                # compare residuals on the scales of the stopping rule, so the
                # kernel-matrix magnitude inside Z^T does not skew the balance
                bal_primal = primal / max(primal_scale, _TINY)
                bal_dual = dual / max(dual_scale, _TINY)
            else:
                bal_primal, bal_dual = primal, dual
            kappa_new = step_size_update(
                bal_primal,
                bal_dual,
                kappa,
                config.residual_balance_factor,
                config.residual_balance_scale,
            )
            if kappa_new != kappa and _KAPPA_BOUNDS[0] < kappa_new < _KAPPA_BOUNDS[1]:
                # scaled dual bookkeeping: lambda carries a 1/kappa factor
                rescale = kappa / kappa_new
                lam *= rescale
                zt_lam *= rescale
                kappa = kappa_new

    if not np.all(np.isfinite(omega)):
        raise SolverError("divergence: non-finite iterate")

    norms = partial_derivative_norms(phi, n)
    support = np.flatnonzero(norms > 0)
    objective = objective_value(ops, y, reg, config, omega)
    return SolveResult(
        omega=omega,
        phi=phi,
        support=support,
        derivative_norms=norms,
        objective=objective,
        iterations=iterations,
        converged=converged,
        residual_history=np.asarray(residuals, dtype=float).reshape(-1, 2),
        kappa_history=np.asarray(kappas, dtype=float),
        objective_history=(
            np.asarray(objectives, dtype=float) if config.track_objective else None
        ),
        state=SolverState(omega.copy(), phi.copy(), lam.copy(), kappa),
    )


def with_tau(config: SolverConfig, tau: float) -> SolverConfig:
    """Copy of a config at a different tau (used along regularization paths)."""
    return replace(config, tau=tau)
