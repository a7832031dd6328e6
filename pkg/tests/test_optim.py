import numpy as np
import pytest

from convsel.optim import Adam, clip_params
from convsel.tensor import Tensor

from oracles import adam_step_ref


def test_adam_single_step_matches_formula():
    w = Tensor(np.array([1.0]), requires_grad=True, name="w")
    opt = Adam([w], alpha=0.001)
    g = np.array([0.1])
    opt.step({w: g})
    expected, _, _ = adam_step_ref(np.array([1.0]), g, t=1,
                                   m=np.zeros(1), v=np.zeros(1), alpha=0.001)
    # delta is about -0.000999999 for the first step
    assert w.data[0] == pytest.approx(expected[0], abs=1e-15)
    assert w.data[0] - 1.0 == pytest.approx(-0.000999999, abs=1e-8)


def test_adam_multi_step_matches_reference():
    rng = np.random.default_rng(11)
    w0 = rng.normal(size=(3, 2))
    w = Tensor(w0.copy(), requires_grad=True, name="w")
    opt = Adam([w], alpha=0.01, weight_decay=0.001)
    ref_w, m, v = w0.copy(), np.zeros_like(w0), np.zeros_like(w0)
    for t in range(1, 6):
        g = rng.normal(size=(3, 2))
        opt.step({w: g})
        ref_w, m, v = adam_step_ref(ref_w, g, t, m, v, alpha=0.01, weight_decay=0.001)
    assert np.allclose(w.data, ref_w, atol=1e-14)


def test_adam_zero_grads_leave_params_unchanged():
    w = Tensor([3.0, -4.0], requires_grad=True, name="w")
    opt = Adam([w])
    for _ in range(5):
        opt.step({w: np.zeros(2)})
    assert np.array_equal(w.data, [3.0, -4.0])
    # missing entries in the map behave as zero gradients
    opt.step({})
    assert np.array_equal(w.data, [3.0, -4.0])


def test_adam_determinism_bit_identical():
    def run():
        w = Tensor([[0.5, -0.5]], requires_grad=True)
        opt = Adam([w], alpha=0.003, weight_decay=0.0005)
        for t in range(10):
            opt.step({w: np.array([[0.1 * t, -0.05]])})
        return w.data.copy()

    assert np.array_equal(run(), run())


def test_adam_rejects_nan_grads_naming_parameter():
    w = Tensor([1.0], requires_grad=True, name="scoring.w_a")
    opt = Adam([w])
    with pytest.raises(FloatingPointError, match="scoring.w_a"):
        opt.step({w: np.array([np.nan])})


def test_clip_params_examples():
    p = Tensor([0.5, -0.5, 0.005], requires_grad=True)
    clip_params([p], 0.01)
    assert np.array_equal(p.data, [0.01, -0.01, 0.005])


def test_clip_params_idempotent():
    rng = np.random.default_rng(3)
    p = Tensor(rng.normal(size=20), requires_grad=True)
    clip_params([p], 0.01)
    once = p.data.copy()
    clip_params([p], 0.01)
    assert np.array_equal(p.data, once)
    assert np.all(np.abs(p.data) <= 0.01)


def test_clip_params_rejects_nonpositive_range():
    p = Tensor([1.0])
    with pytest.raises(ValueError):
        clip_params([p], 0.0)
    with pytest.raises(ValueError):
        clip_params([p], -0.1)
