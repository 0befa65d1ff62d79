"""Closed-form proximal operators for the three sparsity penalties.

The auxiliary variable phi of length d*n is organized in d contiguous
blocks of length n; block a holds the values of the a-th partial derivative
of the model at the n training points. All three proximal maps below are
block soft-thresholding operations: a block whose norm falls below the
threshold is set to exactly zero, which is what makes the reported support
exact rather than approximate.

Penalty values (empirical forms, on blocks phi_a or groups phi_g):

    lasso         sum_a ||phi_a||_2 / sqrt(n)
    group lasso   sum_g p_g ||phi_g||_2 / sqrt(n)      (p_g = group size)
    elastic net   mu * lasso value
                  + (1 - mu) * sum_a ||phi_a||_2^2 / n
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GroupStructure:
    """Disjoint groups of variable indices (0-based) covering range(d)."""

    groups: tuple[tuple[int, ...], ...]
    d: int

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.groups:
            if len(g) == 0:
                raise ValueError("empty group")
            for a in g:
                if not 0 <= a < self.d:
                    raise ValueError(f"group index {a} outside 0..{self.d - 1}")
                if a in seen:
                    raise ValueError(f"variable {a} appears in two groups")
                seen.add(a)
        if len(seen) != self.d:
            missing = sorted(set(range(self.d)) - seen)
            raise ValueError(f"groups do not cover all variables; missing {missing}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    @classmethod
    def from_lists(cls, groups, d: int) -> "GroupStructure":
        return cls(tuple(tuple(int(a) for a in g) for g in groups), d)

    @classmethod
    def singletons(cls, d: int) -> "GroupStructure":
        return cls(tuple((a,) for a in range(d)), d)

    @classmethod
    def consecutive(cls, d: int, size: int) -> "GroupStructure":
        if d % size:
            raise ValueError("d must be a multiple of the group size")
        return cls(
            tuple(tuple(range(i, i + size)) for i in range(0, d, size)), d
        )

    @classmethod
    def from_json(cls, text: str, d: int) -> "GroupStructure":
        """Parse an array of arrays of 1-based variable indices."""
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(g, list) for g in data):
            raise ValueError("groups document must be an array of arrays")
        return cls.from_lists([[a - 1 for a in g] for g in data], d)

    def to_json(self) -> str:
        return json.dumps([[a + 1 for a in g] for g in self.groups])


@dataclass(frozen=True)
class Lasso:
    pass


@dataclass(frozen=True)
class GroupLasso:
    groups: GroupStructure


@dataclass(frozen=True)
class ElasticNet:
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")


Regularizer = Lasso | GroupLasso | ElasticNet


def _blocks(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or n < 1 or v.size % n:
        raise ValueError(f"vector of length {v.size} is not d blocks of length {n}")
    return v.reshape(-1, n)


def _block_sq_norms(blocks: np.ndarray) -> np.ndarray:
    # single accumulation path so that the lasso / group-lasso / elastic-net
    # degenerate cases agree bitwise
    return np.einsum("ij,ij->i", blocks, blocks)


def _shrink_factors(norms: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """max(0, 1 - t/||v||) with the 0/0 case defined as 0."""
    factors = np.zeros_like(norms)
    nz = norms > 0
    factors[nz] = np.maximum(0.0, 1.0 - thresholds[nz] / norms[nz])
    return factors


def prox_lasso(v: np.ndarray, threshold: float, n: int) -> np.ndarray:
    """Blockwise soft threshold: prox of threshold * sum_a ||phi_a||_2.

    The caller supplies threshold = tau / (kappa * sqrt(n)).
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    blocks = _blocks(v, n)
    norms = np.sqrt(_block_sq_norms(blocks))
    factors = _shrink_factors(norms, np.full_like(norms, threshold))
    return (blocks * factors[:, None]).reshape(-1)


def prox_group_lasso(
    v: np.ndarray, base_threshold: float, groups: GroupStructure, n: int
) -> np.ndarray:
    """Groupwise soft threshold with per-group threshold base * p_g."""
    if base_threshold < 0:
        raise ValueError("threshold must be >= 0")
    blocks = _blocks(v, n)
    if blocks.shape[0] != groups.d:
        raise ValueError("group structure does not match the number of blocks")
    sq = _block_sq_norms(blocks)
    out = np.empty_like(blocks)
    for g in groups.groups:
        idx = list(g)
        norm = np.sqrt(sq[idx].sum())
        threshold = base_threshold * len(g)
        factor = (
            np.maximum(0.0, 1.0 - threshold / norm) if norm > 0 else 0.0
        )
        out[idx] = blocks[idx] * factor
    return out.reshape(-1)


def prox_elastic_net(
    v: np.ndarray, tau: float, mu: float, kappa: float, n: int
) -> np.ndarray:
    """Blockwise shrink-and-threshold for the combined penalty.

    Each block is scaled by 1 / (2 tau (1 - mu) / (kappa n) + 1) and then
    soft-thresholded at tau * mu / (kappa sqrt(n)).
    """
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    blocks = _blocks(v, n)
    norms = np.sqrt(_block_sq_norms(blocks))
    threshold = (tau * mu) / (kappa * np.sqrt(n))
    denom = 2.0 * tau * (1.0 - mu) / (kappa * n) + 1.0
    factors = _shrink_factors(norms, np.full_like(norms, threshold))
    return (blocks * (factors / denom)[:, None]).reshape(-1)


def regularizer_value(reg: Regularizer, phi: np.ndarray, n: int) -> float:
    """Penalty value of a block vector (phi or Z @ omega)."""
    blocks = _blocks(phi, n)
    sq = _block_sq_norms(blocks)
    root_n = np.sqrt(n)
    if isinstance(reg, Lasso):
        return float(np.sqrt(sq).sum() / root_n)
    if isinstance(reg, GroupLasso):
        total = 0.0
        for g in reg.groups.groups:
            total += len(g) * np.sqrt(sq[list(g)].sum())
        return float(total / root_n)
    if isinstance(reg, ElasticNet):
        return float(
            reg.mu * np.sqrt(sq).sum() / root_n + (1.0 - reg.mu) * sq.sum() / n
        )
    raise TypeError(f"unknown regularizer {reg!r}")


def partial_derivative_norms(phi: np.ndarray, n: int) -> np.ndarray:
    """Per-variable empirical derivative norms ||phi_a||_2 / sqrt(n)."""
    blocks = _blocks(phi, n)
    return np.sqrt(_block_sq_norms(blocks)) / np.sqrt(n)


def support_set(phi: np.ndarray, n: int) -> np.ndarray:
    """Indices of variables with a nonzero derivative block (0-based)."""
    return np.flatnonzero(partial_derivative_norms(phi, n) > 0)
