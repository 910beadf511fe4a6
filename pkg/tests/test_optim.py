"""Adam updates, bias correction, and global-norm gradient clipping."""

import numpy as np
import pytest

from hgn.autodiff import Tensor
from hgn.errors import ShapeError
from hgn.optim import Adam, AdamState, adam_step, clip_global_norm


def _param(values, grad=None):
    p = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
    if grad is not None:
        p.grad = np.asarray(grad, dtype=np.float64)
    return p


def test_first_step_unit_gradient():
    # Bias correction cancels at t=1, so the update is -lr/(1+eps).
    p = _param([0.0], grad=[1.0])
    adam_step(p, AdamState(lr=0.1))
    assert p.data[0] == pytest.approx(-0.1 / (1.0 + 1e-8), rel=1e-12)
    assert p.data[0] == pytest.approx(-0.1, abs=2e-9)


def test_zero_gradient_is_identity():
    p = _param([1.5, -2.25, 0.0], grad=[0.0, 0.0, 0.0])
    before = p.data.copy()
    adam_step(p, AdamState(lr=0.1))
    assert np.array_equal(p.data, before)


def test_two_steps_constant_gradient_magnitudes():
    p = _param([0.0], grad=[0.7])
    state = AdamState(lr=0.05)
    adam_step(p, state)
    first = abs(p.data[0])
    previous = p.data[0]
    p.grad = np.array([0.7])
    adam_step(p, state)
    second = abs(p.data[0] - previous)
    assert second <= first * (1.0 + 1e-6)


def test_step_count_increments():
    p = _param([0.0], grad=[1.0])
    state = AdamState()
    assert state.step_count == 0
    adam_step(p, state)
    assert state.step_count == 1
    p.grad = np.array([1.0])
    adam_step(p, state)
    assert state.step_count == 2


def test_missing_gradient_is_an_error():
    p = _param([0.0])
    with pytest.raises(ShapeError):
        adam_step(p, AdamState())


def test_optimizer_weight_decay_shrinks_params():
    p = _param([2.0], grad=[0.0])
    Adam([p], lr=0.01, weight_decay=0.1).step()
    assert 0.0 < p.data[0] < 2.0


def test_optimizer_without_decay_leaves_zero_grad_params():
    p = _param([2.0], grad=[0.0])
    Adam([p], lr=0.01).step()
    assert p.data[0] == 2.0


def test_optimizer_zero_grad_resets():
    p = _param([1.0], grad=[3.0])
    Adam([p], lr=0.01).zero_grad()
    assert p.grad is None


def test_optimizer_set_lr():
    opt = Adam([_param([1.0])], lr=0.01)
    opt.set_lr(0.5)
    assert opt.lr == 0.5


def test_clip_scales_joint_norm():
    a = _param([0.0], grad=[3.0])
    b = _param([0.0], grad=[4.0])
    returned = clip_global_norm([a, b], max_norm=1.0)
    assert returned == 5.0
    assert a.grad[0] == pytest.approx(0.6, rel=1e-15)
    assert b.grad[0] == pytest.approx(0.8, rel=1e-15)
    joint = np.sqrt(a.grad[0] ** 2 + b.grad[0] ** 2)
    assert joint == pytest.approx(1.0, rel=1e-12)


def test_clip_noop_below_threshold():
    a = _param([0.0], grad=[0.25])
    assert clip_global_norm([a], max_norm=1.0) == 0.25
    assert a.grad[0] == 0.25


def test_clip_disabled_for_nonpositive_max():
    a = _param([0.0], grad=[30.0])
    assert clip_global_norm([a], max_norm=0.0) == 30.0
    assert a.grad[0] == 30.0


def test_clip_skips_missing_grads():
    a = _param([0.0], grad=[3.0])
    b = _param([0.0])
    assert clip_global_norm([a, b], max_norm=1.0) == 3.0
    assert b.grad is None
