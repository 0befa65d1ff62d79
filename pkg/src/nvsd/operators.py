"""Assembly of the dense matrices used by the finite-dimensional solver.

For n training points in d dimensions the solver works with a coefficient
vector omega = [alpha; beta] of length n + d*n and the following blocks:

    K  (n x n)        kernel matrix, K[i, j] = k(x_i, x_j)
    D  (dn x n)       stacked first-derivative matrices D^a,
                      D^a[i, j] = d k(s, x_j) / d s_a at s = x_i
    L  (dn x dn)      blocks L^{ab} of mixed second derivatives,
                      L^{ab}[i, j] = d^2 k(s, r) / d s_a d r_b at (x_i, x_j)
    F  (n x (n+dn))   [K  D^T]; F @ omega = function values at training points
    Z  (dn x (n+dn))  [D  L];  block a of Z @ omega = values of the a-th
                      partial derivative at the training points
    Q  ((n+dn) x (n+dn))  [[K, 0], [2D, L]]; omega^T Q omega is the squared
                      Hilbert norm of the represented function

Everything is dense by design: the method is quadratic in n*d, so a memory
estimate is checked against a configurable cap before any allocation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    KernelSpec,
    kernel_grad_tensor,
    kernel_hessian_tensor,
    kernel_matrix,
)

DEFAULT_MEMORY_CAP = 4 * 1024**3  # bytes


def estimate_memory_bytes(n: int, d: int) -> int:
    """Bytes of float64 storage for the operator set plus solver workspace."""
    m = n + d * n
    operator_entries = n * n + d * n * n + (d * n) ** 2 + n * m + d * n * m + m * m
    # gram products, the S1 system matrix and its factorization
    workspace_entries = 5 * m * m
    return 8 * (operator_entries + workspace_entries)


@dataclass
class OperatorSet:
    """All matrices for one training set, with lazily cached gram products."""

    kernel: KernelSpec
    X: np.ndarray
    K: np.ndarray
    D: np.ndarray
    L: np.ndarray
    F: np.ndarray
    Z: np.ndarray
    Q: np.ndarray
    n: int
    d: int
    _ztz: np.ndarray | None = field(default=None, repr=False)
    _ftf: np.ndarray | None = field(default=None, repr=False)
    _q_sym: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        """Length of the coefficient vector omega."""
        return self.n + self.d * self.n

    @property
    def ztz(self) -> np.ndarray:
        if self._ztz is None:
            self._ztz = self.Z.T @ self.Z
        return self._ztz

    @property
    def ftf(self) -> np.ndarray:
        if self._ftf is None:
            self._ftf = self.F.T @ self.F
        return self._ftf

    @property
    def q_sym(self) -> np.ndarray:
        """Q + Q^T (positive semidefinite up to roundoff)."""
        if self._q_sym is None:
            self._q_sym = self.Q + self.Q.T
        return self._q_sym

    def split(self, omega: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split omega into (alpha, beta)."""
        return omega[: self.n], omega[self.n :]

    def derivative_values(self, omega: np.ndarray) -> np.ndarray:
        """Z @ omega: per-dimension blocks of derivative values."""
        return self.Z @ omega


def assemble_operators(
    spec: KernelSpec, X, memory_cap_bytes: int = DEFAULT_MEMORY_CAP
) -> OperatorSet:
    """Build the full operator set for a training matrix X (rows = points)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-d (rows = instances)")
    n, d = X.shape
    if n < 1 or d < 1:
        raise ValueError("X must have at least one row and one column")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    needed = estimate_memory_bytes(n, d)
    if needed > memory_cap_bytes:
        raise MemoryError(
            f"operator assembly for n={n}, d={d} needs ~{needed / 1024**3:.2f} GiB, "
            f"above the cap of {memory_cap_bytes / 1024**3:.2f} GiB"
        )
    K = kernel_matrix(spec, X)
    D = kernel_grad_tensor(spec, X).reshape(d * n, n)
    L = kernel_hessian_tensor(spec, X).reshape(d * n, d * n)
    F = np.hstack([K, D.T])
    Z = np.hstack([D, L])
    Q = np.zeros((n + d * n, n + d * n))
    Q[:n, :n] = K
    Q[n:, :n] = 2.0 * D
    Q[n:, n:] = L
    return OperatorSet(kernel=spec, X=X, K=K, D=D, L=L, F=F, Z=Z, Q=Q, n=n, d=d)


def prediction_matrix(spec: KernelSpec, X_train, X_query) -> np.ndarray:
    """Operator P with P @ omega = predictions at the query points.

    Row m is [k(x_1, q_m), ..., k(x_n, q_m), grad blocks ...] so that the
    product reproduces sum_j alpha_j k(x_j, q) + sum_{a,j} beta_{aj} times
    the derivative of k(s, q) w.r.t. s_a at s = x_j.
    """
    X_train = np.asarray(X_train, dtype=float)
    X_query = np.asarray(X_query, dtype=float)
    n, d = X_train.shape
    m = X_query.shape[0]
    Kq = kernel_matrix(spec, X_train, X_query)  # (n, m)
    Gq = kernel_grad_tensor(spec, X_train, X_query)  # (d, n, m)
    P = np.empty((m, n + d * n))
    P[:, :n] = Kq.T
    P[:, n:] = Gq.reshape(d * n, m).T
    return P
