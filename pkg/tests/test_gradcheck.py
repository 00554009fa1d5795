import numpy as np
import pytest

from vstgan import tensor as T
from vstgan.gradcheck import grad_check, kink_margin


def test_linear_objective_is_exact():
    rng = np.random.default_rng(0)
    c = rng.standard_normal((3, 4))

    def objective(leaves):
        (x,) = leaves
        return T.sum(T.multiply(x, T.Tensor(c, dtype=np.float64)))

    res = grad_check(objective, [rng.standard_normal((3, 4))])
    assert res.max_rel_err < 1e-10


def test_mse_of_conv_composite():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((2, 1, 3, 3))
    target = rng.standard_normal((2, 4, 4))

    def objective(leaves):
        x, wt = leaves
        out = T.conv2d(x, wt)
        return T.mean(T.square(out - T.Tensor(target, dtype=np.float64)))

    res = grad_check(objective, [rng.standard_normal((1, 4, 4)), w])
    assert res.max_rel_err < 1e-6


def test_nonfinite_objective_rejected():
    def objective(leaves):
        (x,) = leaves
        return T.sum(T.exp(T.scalar_multiply(x, 1000.0)))

    with pytest.raises(T.NonFiniteError):
        grad_check(objective, [np.ones(2)])


def test_coordinate_subsampling_counts():
    def objective(leaves):
        (x,) = leaves
        return T.sum(T.square(x))

    res = grad_check(objective, [np.arange(1.0, 26.0).reshape(5, 5)],
                     coords=7, rng=np.random.default_rng(2))
    assert res.checked == 7
    assert res.max_rel_err < 1e-8


def test_kink_margin_reports_distance_to_corner():
    x = T.Tensor(np.array([0.25, -0.75], dtype=np.float64), requires_grad=True)
    out = T.sum(T.relu(x))
    assert kink_margin(out) == pytest.approx(0.25)
    smooth = T.sum(T.square(x))
    assert kink_margin(smooth) == float("inf")
