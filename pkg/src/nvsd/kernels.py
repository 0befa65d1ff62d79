"""Kernel functions and their first and second order partial derivatives.

The solver needs, besides plain kernel evaluations, the derivative of the
kernel with respect to single coordinates of its first argument and the
mixed second derivative with respect to coordinates of both arguments.
All three families implemented here (linear, polynomial, Gaussian) admit
closed forms:

    linear      k(x, x') = <x, x'>
    polynomial  k(x, x') = (<x, x'> + c)^p
    gaussian    k(x, x') = exp(-||x - x'||^2 / (2 sigma^2))

Derivatives are always computed from these closed forms; finite differences
are used only in the test suite to cross-check them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

LINEAR = "linear"
POLYNOMIAL = "polynomial"
GAUSSIAN = "gaussian"

_FAMILIES = (LINEAR, POLYNOMIAL, GAUSSIAN)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its hyperparameters.

    ``degree`` and ``offset`` apply to the polynomial family only, ``width``
    to the Gaussian family only; irrelevant fields are ignored.
    """

    family: str
    degree: int = 3
    offset: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == POLYNOMIAL:
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be an integer >= 1")
            if self.offset < 0:
                raise ValueError("polynomial offset must be >= 0")
        if self.family == GAUSSIAN and not self.width > 0:
            raise ValueError("gaussian width must be > 0")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(family=LINEAR)

    @classmethod
    def polynomial(cls, degree: int = 3, offset: float = 1.0) -> "KernelSpec":
        return cls(family=POLYNOMIAL, degree=degree, offset=offset)

    @classmethod
    def gaussian(cls, width: float) -> "KernelSpec":
        return cls(family=GAUSSIAN, width=width)


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-d array of points (rows = instances)")
    return X


def _check_same_dim(X: np.ndarray, X2: np.ndarray) -> None:
    if X.shape[1] != X2.shape[1]:
        raise ValueError(
            f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]} columns"
        )


def _gram(X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    G = X @ X2.T
    if X2 is X:
        # enforce bitwise symmetry (BLAS blocking may break it)
        G = 0.5 * (G + G.T)
    return G


def _sq_dists(X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    G = _gram(X, X2)
    s = np.einsum("ij,ij->i", X, X)
    s2 = s if X2 is X else np.einsum("ij,ij->i", X2, X2)
    return np.maximum(s[:, None] + s2[None, :] - 2.0 * G, 0.0)


def kernel_matrix(spec: KernelSpec, X, X2=None) -> np.ndarray:
    """Pairwise kernel evaluations, entry (i, j) = k(X[i], X2[j])."""
    X = _as_points(X)
    X2 = X if X2 is None else _as_points(X2)
    _check_same_dim(X, X2)
    if spec.family == LINEAR:
        return _gram(X, X2)
    if spec.family == POLYNOMIAL:
        return (_gram(X, X2) + spec.offset) ** spec.degree
    return np.exp(_sq_dists(X, X2) / (-2.0 * spec.width**2))


def kernel_grad_tensor(spec: KernelSpec, X, X2=None) -> np.ndarray:
    """First-derivative evaluations as a (d, n, m) tensor.

    Entry (a, i, j) is the derivative of k(s, X2[j]) with respect to s_a,
    evaluated at s = X[i].
    """
    X = _as_points(X)
    X2 = X if X2 is None else _as_points(X2)
    _check_same_dim(X, X2)
    d = X.shape[1]
    n, m = X.shape[0], X2.shape[0]
    if spec.family == LINEAR:
        return np.broadcast_to(X2.T[:, None, :], (d, n, m)).copy()
    if spec.family == POLYNOMIAL:
        base = _gram(X, X2) + spec.offset
        coef = spec.degree * base ** (spec.degree - 1)
        return coef[None, :, :] * X2.T[:, None, :]
    E = np.exp(_sq_dists(X, X2) / (-2.0 * spec.width**2))
    diff = X2.T[:, None, :] - X.T[:, :, None]
    return E[None, :, :] * diff / spec.width**2


def kernel_hessian_tensor(spec: KernelSpec, X, X2=None) -> np.ndarray:
    """Mixed second-derivative evaluations as a (d, n, d, m) tensor.

    Entry (a, i, b, j) is d^2 k(s, r) / ds_a dr_b at s = X[i], r = X2[j].
    For X2 is X the tensor satisfies T[a, i, b, j] == T[b, j, a, i] exactly
    (the construction below only combines bitwise-symmetric factors).
    """
    X = _as_points(X)
    X2 = X if X2 is None else _as_points(X2)
    _check_same_dim(X, X2)
    d = X.shape[1]
    n, m = X.shape[0], X2.shape[0]
    if spec.family == LINEAR:
        T = np.zeros((d, n, d, m))
        for a in range(d):
            T[a, :, a, :] = 1.0
        return T
    if spec.family == POLYNOMIAL:
        p, c = spec.degree, spec.offset
        base = _gram(X, X2) + c
        if p >= 2:
            outer = np.einsum("ib,ja->aibj", X, X2)
            T = outer * (p * (p - 1) * base ** (p - 2))[None, :, None, :]
        else:
            T = np.zeros((d, n, d, m))
        diag = p * base ** (p - 1)
        for a in range(d):
            T[a, :, a, :] += diag
        return T
    sigma2 = spec.width**2
    E = np.exp(_sq_dists(X, X2) / (-2.0 * sigma2))
    diff = X[:, None, :] - X2[None, :, :]
    T = np.einsum("ija,ijb->aibj", diff, diff) * (-1.0 / sigma2**2)
    inv = 1.0 / sigma2
    for a in range(d):
        T[a, :, a, :] += inv
    return T * E[None, :, None, :]


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-d point")
    return x


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    """k(x, x') for a single pair of points."""
    x, xp = _as_vector(x), _as_vector(xp)
    return float(kernel_matrix(spec, x[None, :], xp[None, :])[0, 0])


def kernel_grad1(spec: KernelSpec, x, xp) -> np.ndarray:
    """Gradient of k(s, x') with respect to s, evaluated at s = x."""
    x, xp = _as_vector(x), _as_vector(xp)
    return kernel_grad_tensor(spec, x[None, :], xp[None, :])[:, 0, 0]


def kernel_cross_hessian(spec: KernelSpec, x, xp) -> np.ndarray:
    """Matrix of d^2 k(s, r) / ds_a dr_b at s = x, r = x'."""
    x, xp = _as_vector(x), _as_vector(xp)
    return kernel_hessian_tensor(spec, x[None, :], xp[None, :])[:, 0, :, 0]


def gaussian_width_heuristic(X, neighbors: int = 20) -> float:
    """Median of pooled nearest-neighbor distances.

    For every point the Euclidean distances to its ``min(neighbors, n - 1)``
    nearest neighbors are collected; the result is the median of the pooled
    collection. Raises on degenerate (duplicate-only) data.
    """
    X = _as_points(X)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points for the width heuristic")
    k = min(int(neighbors), n - 1)
    if k < 1:
        raise ValueError("neighbors must be >= 1")
    dists = cdist(X, X)
    # drop the self-distance (one zero per row) before pooling
    pooled = np.sort(dists, axis=1)[:, 1 : k + 1]
    width = float(np.median(pooled))
    if width <= 0.0:
        raise ValueError("degenerate data: median neighbor distance is zero")
    return width
