import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvsd.kernels import (
    KernelSpec,
    gaussian_width_heuristic,
    kernel_cross_hessian,
    kernel_eval,
    kernel_grad1,
    kernel_grad_tensor,
    kernel_hessian_tensor,
    kernel_matrix,
)

from conftest import central_diff_cross_hessian, central_diff_grad


def random_spec(rng, family):
    if family == "linear":
        return KernelSpec.linear()
    if family == "polynomial":
        return KernelSpec.polynomial(degree=int(rng.integers(1, 5)), offset=float(rng.uniform(0.1, 2.0)))
    return KernelSpec.gaussian(float(rng.uniform(0.5, 2.5)))


def test_kernel_eval_examples():
    assert kernel_eval(KernelSpec.gaussian(0.7), [1.0, -2.0], [1.0, -2.0]) == 1.0
    assert kernel_eval(KernelSpec.linear(), [1.0, 2.0], [3.0, 4.0]) == 11.0
    assert kernel_eval(KernelSpec.polynomial(3, 1.0), [1.0, 0.0], [1.0, 0.0]) == 8.0


def test_kernel_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval(KernelSpec.linear(), [1.0, 2.0], [1.0, 2.0, 3.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec.gaussian(0.0)
    with pytest.raises(ValueError):
        KernelSpec.polynomial(degree=0)
    with pytest.raises(ValueError):
        KernelSpec.polynomial(degree=2, offset=-0.5)
    with pytest.raises(ValueError):
        KernelSpec(family="cubic")


def test_grad_trivial_examples():
    # coincident points have a vanishing gaussian gradient
    g = kernel_grad1(KernelSpec.gaussian(1.3), [0.5, 1.5], [0.5, 1.5])
    assert np.all(g == 0.0)
    # linear kernel gradient is the second argument
    g = kernel_grad1(KernelSpec.linear(), [9.0, -4.0], [3.0, 4.0])
    assert np.array_equal(g, [3.0, 4.0])


def test_hessian_trivial_examples():
    H = kernel_cross_hessian(KernelSpec.linear(), [1.0, 2.0, 3.0], [0.0, 1.0, 0.0])
    assert np.array_equal(H, np.eye(3))
    sigma = 1.7
    H = kernel_cross_hessian(KernelSpec.gaussian(sigma), [1.0, -1.0], [1.0, -1.0])
    assert np.allclose(H, np.eye(2) / sigma**2, rtol=1e-15)


@pytest.mark.parametrize("family", ["linear", "polynomial", "gaussian"])
def test_grad_matches_finite_differences(family, rng):
    for _ in range(100):
        d = int(rng.integers(1, 7))
        spec = random_spec(rng, family)
        x, xp = rng.standard_normal(d), rng.standard_normal(d)
        g = kernel_grad1(spec, x, xp)
        fd = central_diff_grad(lambda s: kernel_eval(spec, s, xp), x)
        err = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-6)
        assert err <= 1e-5


@pytest.mark.parametrize("family", ["linear", "polynomial", "gaussian"])
def test_hessian_matches_finite_differences(family, rng):
    for _ in range(40):
        d = int(rng.integers(1, 6))
        spec = random_spec(rng, family)
        x, xp = rng.standard_normal(d), rng.standard_normal(d)
        H = kernel_cross_hessian(spec, x, xp)
        fd = central_diff_cross_hessian(lambda s, r: kernel_eval(spec, s, r), x, xp)
        err = np.linalg.norm(H - fd) / max(np.linalg.norm(fd), 1e-6)
        assert err <= 1e-4


def test_tensor_and_single_pair_agree(rng):
    X = rng.standard_normal((6, 4))
    X2 = rng.standard_normal((5, 4))
    for family in ("linear", "polynomial", "gaussian"):
        spec = random_spec(rng, family)
        K = kernel_matrix(spec, X, X2)
        G = kernel_grad_tensor(spec, X, X2)
        H = kernel_hessian_tensor(spec, X, X2)
        for i in (0, 3):
            for j in (1, 4):
                assert K[i, j] == pytest.approx(kernel_eval(spec, X[i], X2[j]), rel=1e-12)
                assert G[:, i, j] == pytest.approx(kernel_grad1(spec, X[i], X2[j]), rel=1e-12)
                assert H[:, i, :, j] == pytest.approx(
                    kernel_cross_hessian(spec, X[i], X2[j]), rel=1e-12
                )


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=5),
    st.data(),
)
def test_kernel_symmetry_property(xs, data):
    x = np.asarray(xs)
    xp = np.asarray(data.draw(st.lists(st.floats(-5, 5), min_size=len(xs), max_size=len(xs))))
    for spec in (KernelSpec.linear(), KernelSpec.polynomial(2, 0.5), KernelSpec.gaussian(1.0)):
        assert kernel_eval(spec, x, xp) == kernel_eval(spec, xp, x)


def test_width_heuristic_examples():
    assert gaussian_width_heuristic(np.array([[0.0], [1.0]])) == 1.0
    assert gaussian_width_heuristic(np.array([[0.0], [1.0], [2.0]]), neighbors=1) == 1.0


def test_width_heuristic_brute_force_oracle(rng):
    X = rng.standard_normal((100, 5))
    k = 20
    pooled = []
    for i in range(100):
        dists = sorted(
            math.sqrt(sum((X[i, c] - X[j, c]) ** 2 for c in range(5)))
            for j in range(100)
            if j != i
        )
        pooled.extend(dists[:k])
    expected = float(np.median(pooled))
    assert gaussian_width_heuristic(X, neighbors=k) == expected


def test_width_heuristic_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        gaussian_width_heuristic(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        gaussian_width_heuristic(np.zeros((1, 3)))
