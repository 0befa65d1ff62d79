import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_diff_grad(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for a in range(x.size):
        e = np.zeros(x.size)
        e[a] = h
        g[a] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def central_diff_cross_hessian(f, x, xp, h=1e-5):
    """Nested central differences of f(x, x') in (x_a, x'_b)."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    d = x.size
    H = np.empty((d, d))
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = h
        for b in range(d):
            eb = np.zeros(d)
            eb[b] = h
            H[a, b] = (
                f(x + ea, xp + eb)
                - f(x + ea, xp - eb)
                - f(x - ea, xp + eb)
                + f(x - ea, xp - eb)
            ) / (4.0 * h * h)
    return H
