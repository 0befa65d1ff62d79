"""Synthetic regression problems for the benchmark suite.

All three generators produce 18 input variables of which only the six
dimensions {1, 2, 3, 7, 8, 9} (1-based) drive the target, organized in six
consecutive groups of three. Noise terms are written N(mean, variance);
the target noise has variance 0.01 and the measurement noise in the third
problem has variance 0.1.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .prox import GroupStructure

D = 18
TRUE_SUPPORT = frozenset({0, 1, 2, 6, 7, 8})  # 0-based
NOISE_STD = 0.1  # target noise: N(0, 0.01)
MEASUREMENT_NOISE_STD = np.sqrt(0.1)  # input noise in e3: N(0, 0.1)

# strongly correlated column pairs in e2 (0-based); the first three carry
# the signal, the rest mirror the structure among irrelevant variables
E2_PAIRS = ((0, 6), (1, 7), (2, 8), (3, 9), (4, 10), (5, 11), (12, 15), (13, 16), (14, 17))
E2_CORRELATION = 0.95


@dataclass(frozen=True)
class SyntheticDataset:
    X: np.ndarray
    y: np.ndarray
    true_support: frozenset
    groups: GroupStructure
    seed: int


def _groups() -> GroupStructure:
    return GroupStructure.consecutive(D, 3)


def e1_target(X: np.ndarray) -> np.ndarray:
    """Sum of all degree-3 monomials (with repetition) over each relevant block."""
    X = np.asarray(X, dtype=float)
    y = np.zeros(X.shape[0])
    for block in (range(0, 3), range(6, 9)):
        for i, j, k in combinations_with_replacement(block, 3):
            y += X[:, i] * X[:, j] * X[:, k]
    return y


def e2_target(X: np.ndarray) -> np.ndarray:
    """Full triple sum over each relevant block (equals the cube of the block sum)."""
    X = np.asarray(X, dtype=float)
    y = np.zeros(X.shape[0])
    for block in (range(0, 3), range(6, 9)):
        for i in block:
            for j in block:
                for k in block:
                    y += X[:, i] * X[:, j] * X[:, k]
    return y


def e3_target(Z: np.ndarray) -> np.ndarray:
    """Bump target 10 u exp(-2 u) with u = z_1^2 + z_3^2 on the latent factors."""
    Z = np.asarray(Z, dtype=float)
    u = Z[:, 0] ** 2 + Z[:, 2] ** 2
    return 10.0 * u * np.exp(-2.0 * u)


def gen_e1(n: int, seed: int) -> SyntheticDataset:
    """Independent standard-normal inputs, grouped cubic target."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, D))
    y = e1_target(X) + NOISE_STD * rng.standard_normal(n)
    return SyntheticDataset(X, y, TRUE_SUPPORT, _groups(), seed)


def gen_e2(n: int, seed: int) -> SyntheticDataset:
    """Pairwise-correlated inputs, cubic target on two blocks."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, D))
    X = np.empty((n, D))
    rho = E2_CORRELATION
    comp = np.sqrt(1.0 - rho**2)
    for a, b in E2_PAIRS:
        X[:, a] = U[:, a]
        X[:, b] = rho * U[:, a] + comp * U[:, b]
    y = e2_target(X) + NOISE_STD * rng.standard_normal(n)
    return SyntheticDataset(X, y, TRUE_SUPPORT, _groups(), seed)


def gen_e3(n: int, seed: int) -> SyntheticDataset:
    """Noisy triplicate measurements of six latent factors; bump target."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, 6))
    y = e3_target(Z) + NOISE_STD * rng.standard_normal(n)
    X = np.repeat(Z, 3, axis=1) + MEASUREMENT_NOISE_STD * rng.standard_normal((n, D))
    return SyntheticDataset(X, y, TRUE_SUPPORT, _groups(), seed)


GENERATORS = {"e1": gen_e1, "e2": gen_e2, "e3": gen_e3}
