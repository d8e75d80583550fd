"""Reverse-mode gradient correctness: finite differences for every
primitive, plus tape bookkeeping semantics (accumulation, leaves, errors)."""

import numpy as np
import pytest

from fccgan.engine import BNState, ConvGeometry, Tape, Tensor, backward, ShapeError, ops

from gradcheck import fd_check


def tp(a):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


def weighted_mean(y, rng):
    # fixed random projection makes gradients non-uniform
    r = Tensor(rng.standard_normal(y.shape))
    return ops.mean(ops.mul(y, r))


# ---------------------------------------------------------------------------
# per-primitive finite-difference checks (fast spot versions; the acceptance
# suite runs the full randomized sweeps)

def test_grad_conv2d(backend, rng):
    x = tp(rng.standard_normal((2, 3, 6, 6)))
    w = tp(rng.standard_normal((4, 3, 3, 3)))
    b = tp(rng.standard_normal(4))
    g = ConvGeometry(6, 6, 3, 2, 1)
    err = fd_check(lambda: weighted_mean(ops.conv2d(x, w, b, g), np.random.default_rng(0)), [x, w, b])
    assert err < 1e-4


def test_grad_conv2d_asymmetric_pad(backend, rng):
    x = tp(rng.standard_normal((1, 2, 8, 8)))
    w = tp(rng.standard_normal((3, 2, 4, 4)))
    b = tp(rng.standard_normal(3))
    g = ConvGeometry(8, 8, 4, 1, 1, pad_hi=2)   # size-preserving unit stride
    err = fd_check(lambda: weighted_mean(ops.conv2d(x, w, b, g), np.random.default_rng(1)), [x, w, b])
    assert err < 1e-4


def test_grad_conv_transpose2d(backend, rng):
    x = tp(rng.standard_normal((2, 3, 4, 4)))
    w = tp(rng.standard_normal((3, 2, 4, 4)))
    b = tp(rng.standard_normal(2))
    g = ConvGeometry(4, 4, 4, 2, 1)
    err = fd_check(lambda: weighted_mean(ops.conv_transpose2d(x, w, b, g), np.random.default_rng(2)), [x, w, b])
    assert err < 1e-4


def test_grad_conv_transpose2d_output_pad(backend, rng):
    x = tp(rng.standard_normal((1, 2, 3, 3)))
    w = tp(rng.standard_normal((2, 2, 3, 3)))
    b = tp(rng.standard_normal(2))
    g = ConvGeometry(3, 3, 3, 2, 1, output_pad=1)
    err = fd_check(lambda: weighted_mean(ops.conv_transpose2d(x, w, b, g), np.random.default_rng(3)), [x, w, b])
    assert err < 1e-4


def test_grad_avg_pool(rng):
    x = tp(rng.standard_normal((2, 3, 8, 8)))
    err = fd_check(lambda: weighted_mean(ops.avg_pool2d(x, 2), np.random.default_rng(4)), [x])
    assert err < 1e-4


def test_grad_batch_norm_2d(rng):
    x = tp(rng.standard_normal((16, 5)))
    gm = tp(rng.standard_normal(5) + 1.0)
    bt = tp(rng.standard_normal(5))

    def loss():
        return weighted_mean(ops.batch_norm(x, gm, bt, BNState(5, np.float64), "train"), np.random.default_rng(5))

    assert fd_check(loss, [x, gm, bt]) < 1e-4


def test_grad_batch_norm_4d(rng):
    x = tp(rng.standard_normal((4, 3, 5, 5)))
    gm = tp(rng.standard_normal(3) + 1.0)
    bt = tp(rng.standard_normal(3))

    def loss():
        return weighted_mean(ops.batch_norm(x, gm, bt, BNState(3, np.float64), "train"), np.random.default_rng(6))

    assert fd_check(loss, [x, gm, bt]) < 1e-4


@pytest.mark.parametrize("kind", ["relu", "leaky_relu", "tanh", "sigmoid"])
def test_grad_activations(kind, rng):
    vals = rng.standard_normal(100)
    vals[np.abs(vals) < 1e-3] += 0.01     # stay clear of the relu-family kink
    x = tp(vals)
    err = fd_check(lambda: weighted_mean(ops.activation(x, kind, 0.2), np.random.default_rng(7)), [x])
    assert err < 1e-4


def test_grad_affine(rng):
    x = tp(rng.standard_normal((4, 6)))
    w = tp(rng.standard_normal((6, 3)))
    b = tp(rng.standard_normal(3))
    err = fd_check(lambda: weighted_mean(ops.affine(x, w, b), np.random.default_rng(8)), [x, w, b])
    assert err < 1e-4


def test_grad_elementwise_chain(rng):
    x = tp(rng.random(20) + 0.5)
    y = tp(rng.standard_normal(20))

    def loss():
        z = ops.mul(ops.log(x), y)
        z = ops.add(z, ops.mul(ops.sub(y, 0.25), 0.5))
        z = ops.clamp(z, -0.8, 0.8)
        return ops.mean(z)

    clamped = np.abs(np.log(x.data) * y.data + (y.data - 0.25) * 0.5)
    mask = np.abs(clamped - 0.8) < 1e-3   # clamp kink
    assert fd_check(loss, [x, y], exclude={x: mask, y: mask}) < 1e-4


def test_grad_cross_entropy(rng):
    z = tp(rng.standard_normal((8, 5)))
    labels = rng.integers(0, 5, 8)
    assert fd_check(lambda: ops.cross_entropy_logits(z, labels), [z]) < 1e-4


# ---------------------------------------------------------------------------
# backward semantics

def test_backward_sum_gives_ones(rng):
    x = tp(rng.standard_normal((3, 4)))
    with Tape() as t:
        loss = ops.sum_(x)
    g = backward(loss, t)
    assert np.array_equal(g[x], np.ones((3, 4)))


def test_backward_sum_relu_mask():
    x = tp(np.array([-2.0, -0.5, 0.5, 3.0]))
    with Tape() as t:
        loss = ops.sum_(ops.relu(x))
    g = backward(loss, t)
    assert np.array_equal(g[x], np.array([0.0, 0.0, 1.0, 1.0]))


def test_backward_requires_scalar(rng):
    x = tp(rng.standard_normal(4))
    with Tape() as t:
        y = ops.mul(x, 2.0)
    with pytest.raises(ShapeError, match="scalar"):
        backward(y, t)


def test_backward_accumulates_across_calls(rng):
    x = tp(rng.standard_normal(5))
    with Tape() as t:
        loss = ops.mean(x)
    g1 = backward(loss, t)
    g2 = backward(loss, t, into=dict(g1))
    assert np.allclose(g2[x], 2 * g1[x])


def test_backward_fanout_accumulates(rng):
    x = tp(rng.standard_normal(6))
    with Tape() as t:
        a = ops.mul(x, 3.0)
        b = ops.mul(x, 2.0)
        loss = ops.sum_(ops.add(a, b))
    g = backward(loss, t)
    assert np.allclose(g[x], 5.0)


def test_leaf_grads_only(rng):
    x = tp(rng.standard_normal(4))
    with Tape() as t:
        y = ops.mul(x, 2.0)       # intermediate, requires grad
        loss = ops.sum_(y)
    g = backward(loss, t)
    assert x in g and y not in g


def test_no_recording_without_tape(rng):
    x = tp(rng.standard_normal(4))
    y = ops.mul(x, 2.0)
    assert y.requires_grad           # requireness still propagates
    with Tape() as t:
        pass
    assert len(t) == 0


def test_detached_input_gets_no_grad(rng):
    x = tp(rng.standard_normal(4))
    with Tape() as t:
        y = ops.mul(x.detach(), 3.0)
        z = ops.add(y, x) if y.requires_grad else ops.add(x, y)
        loss = ops.sum_(z)
    g = backward(loss, t)
    assert np.allclose(g[x], 1.0)
