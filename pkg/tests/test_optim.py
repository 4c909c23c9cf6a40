import math

import numpy as np
import pytest

from loraforge.errors import NumericError, RangeError
from loraforge.optim import SGD, Adam, cosine_anneal_lr, warmup_cosine_lr
from loraforge.tensor import Tensor


def test_sgd_plain_step():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([1.0], dtype=np.float32)
    SGD([("p", p)], lr=0.1).step()
    np.testing.assert_allclose(p.data, [0.9], rtol=1e-6)


def test_sgd_leaves_grad_untouched():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([2.0], dtype=np.float32)
    opt = SGD([("p", p)], lr=0.1, momentum=0.9, weight_decay=0.01)
    opt.step()
    np.testing.assert_array_equal(p.grad, [2.0])


def test_adam_first_step_magnitude():
    # bias-corrected first step with constant gradient moves by ~lr
    p = Tensor(np.array([0.0]), requires_grad=True)
    p.grad = np.array([3.7], dtype=np.float32)
    Adam([("p", p)], lr=0.01).step()
    np.testing.assert_allclose(abs(p.data[0]), 0.01, rtol=1e-3)


def test_step_counter_increments():
    p = Tensor(np.array([0.0]), requires_grad=True)
    opt = Adam([("p", p)])
    for expected in (1, 2, 3):
        p.grad = np.array([1.0], dtype=np.float32)
        opt.step()
        assert opt.step_count == expected


def test_nan_grad_refused():
    p = Tensor(np.array([0.0]), requires_grad=True)
    p.grad = np.array([np.nan], dtype=np.float32)
    before = p.data.copy()
    with pytest.raises(NumericError):
        SGD([("p", p)], lr=0.1).step()
    np.testing.assert_array_equal(p.data, before)


def test_sgd_momentum_quadratic_bowl():
    # scalar simulation oracle: loss 0.5*x^2 must strictly decrease
    p = Tensor(np.array([5.0]), requires_grad=True)
    opt = SGD([("p", p)], lr=0.05, momentum=0.9)
    losses = []
    for _ in range(100):
        loss = 0.5 * float(p.data[0]) ** 2
        losses.append(loss)
        p.grad = p.data.copy()
        opt.step()
    assert losses[-1] < losses[0]
    assert losses[-1] < 1e-3


def test_cosine_anneal_endpoints():
    assert cosine_anneal_lr(0, 100, 1e-3) == pytest.approx(1e-3)
    assert cosine_anneal_lr(100, 100, 1e-3) == pytest.approx(0.0, abs=1e-12)
    assert cosine_anneal_lr(50, 100, 1e-3) == pytest.approx(0.5e-3)


def test_cosine_anneal_range_errors():
    with pytest.raises(RangeError):
        cosine_anneal_lr(101, 100, 1e-3)
    with pytest.raises(RangeError):
        cosine_anneal_lr(0, 0, 1e-3)


def test_warmup_cosine_ramp_then_decay():
    lrs = [warmup_cosine_lr(s, 100, 10, 0.1) for s in range(100)]
    assert lrs[0] == pytest.approx(0.01)
    assert lrs[9] == pytest.approx(0.1)
    assert max(lrs) <= 0.1 + 1e-12
    assert lrs[-1] < 0.01


def test_adam_converges_on_quadratic():
    p = Tensor(np.array([3.0]), requires_grad=True)
    opt = Adam([("p", p)], lr=0.1)
    for _ in range(200):
        p.grad = p.data.copy()
        opt.step()
    assert abs(float(p.data[0])) < 1e-2
