"""Differentiable primitives.

Each op validates shapes/dtypes, computes forward with the active conv
backend (or numpy for elementwise work), and records a backward closure on
the innermost active Tape when any operand requires grad. There is no
general broadcasting: bias-add and python scalars are the only exceptions.
"""

from __future__ import annotations

import numpy as np

from .backend import get_backend
from .geometry import ConvGeometry
from .tensor import Tensor, ShapeError, GeometryError, EngineError, active_tape, check_float

ACTIVATION_KINDS = ("relu", "leaky_relu", "tanh", "sigmoid")


def _make(data, op, inputs, backward_fn):
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    if requires:
        tape = active_tape()
        if tape is not None:
            tape.record(op, inputs, out, backward_fn)
    return out


# ---------------------------------------------------------------------------
# convolution family

def conv2d(x, w, b, geom: ConvGeometry):
    """Cross-correlation of NCHW input with [F,C,k,k] weights plus bias."""
    dt = check_float("conv2d", x, w, b)
    if x.ndim != 4 or w.ndim != 4 or b.ndim != 1:
        raise ShapeError(f"conv2d expects x[N,C,H,W], w[F,C,k,k], b[F]; got {x.shape}, {w.shape}, {b.shape}")
    if w.shape[2] != w.shape[3] or w.shape[2] != geom.kernel:
        raise ShapeError(f"conv2d kernel mismatch: weights {w.shape} vs geometry k={geom.kernel}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d channel mismatch: input has {x.shape[1]} channels, weights expect {w.shape[1]}")
    if b.shape[0] != w.shape[0]:
        raise ShapeError(f"conv2d bias length {b.shape[0]} != filter count {w.shape[0]}")
    if (x.shape[2], x.shape[3]) != (geom.in_h, geom.in_w):
        raise ShapeError(f"conv2d input {x.shape[2]}x{x.shape[3]} != geometry {geom.in_h}x{geom.in_w}")
    geom.out_size_forward()   # raises GeometryError if degenerate

    K = get_backend()
    s, plo, phi = geom.stride, geom.pad_lo, geom.pad_trail
    y = K.conv2d_fwd(x.data, w.data, s, plo, phi)
    y += b.data.reshape(1, -1, 1, 1)
    h, wd, k = geom.in_h, geom.in_w, geom.kernel
    need_x, need_w, need_b = x.requires_grad, w.requires_grad, b.requires_grad

    def bwd(gy):
        gx = K.conv2d_bwd_input(gy, w.data, s, plo, phi, h, wd) if need_x else None
        gw = K.conv2d_bwd_weight(gy, x.data, k, s, plo, phi) if need_w else None
        gb = gy.sum(axis=(0, 2, 3)) if need_b else None
        return gx, gw, gb

    return _make(y.astype(dt, copy=False), "conv2d", (x, w, b), bwd)


def conv_transpose2d(x, w, b, geom: ConvGeometry):
    """Adjoint of conv2d: [C,F,k,k] weights, in-channels first."""
    dt = check_float("conv_transpose2d", x, w, b)
    if x.ndim != 4 or w.ndim != 4 or b.ndim != 1:
        raise ShapeError(f"conv_transpose2d expects x[N,C,H,W], w[C,F,k,k], b[F]; got {x.shape}, {w.shape}, {b.shape}")
    if w.shape[2] != w.shape[3] or w.shape[2] != geom.kernel:
        raise ShapeError(f"conv_transpose2d kernel mismatch: weights {w.shape} vs geometry k={geom.kernel}")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"conv_transpose2d channel mismatch: input has {x.shape[1]}, weights expect {w.shape[0]}")
    if b.shape[0] != w.shape[1]:
        raise ShapeError(f"conv_transpose2d bias length {b.shape[0]} != filter count {w.shape[1]}")
    if (x.shape[2], x.shape[3]) != (geom.in_h, geom.in_w):
        raise ShapeError(f"conv_transpose2d input {x.shape[2]}x{x.shape[3]} != geometry {geom.in_h}x{geom.in_w}")
    oh, ow = geom.out_size_transposed()

    K = get_backend()
    s, plo, phi = geom.stride, geom.pad_lo, geom.pad_trail
    y = K.convt2d_fwd(x.data, w.data, s, plo, phi, oh, ow)
    y += b.data.reshape(1, -1, 1, 1)
    h, wd, k = geom.in_h, geom.in_w, geom.kernel
    need_x, need_w, need_b = x.requires_grad, w.requires_grad, b.requires_grad

    def bwd(gy):
        gx = K.convt2d_bwd_input(gy, w.data, s, plo, phi, h, wd) if need_x else None
        gw = K.convt2d_bwd_weight(gy, x.data, k, s, plo, phi) if need_w else None
        gb = gy.sum(axis=(0, 2, 3)) if need_b else None
        return gx, gw, gb

    return _make(y.astype(dt, copy=False), "conv_transpose2d", (x, w, b), bwd)


def avg_pool2d(x, pool):
    check_float("avg_pool2d", x)
    if x.ndim != 4:
        raise ShapeError(f"avg_pool2d expects NCHW, got {x.shape}")
    if pool < 1:
        raise GeometryError(f"pool size must be positive, got {pool}")
    if x.shape[2] % pool or x.shape[3] % pool:
        raise GeometryError(f"spatial size {x.shape[2]}x{x.shape[3]} not divisible by pool {pool}")
    K = get_backend()
    y = K.avgpool2d_fwd(x.data, pool)

    def bwd(gy):
        return (K.avgpool2d_bwd(gy, pool),)

    return _make(y, "avg_pool2d", (x,), bwd)


# ---------------------------------------------------------------------------
# batch normalization

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


class BNState:
    """Running moments of one batch-norm layer (not trained parameters)."""

    def __init__(self, channels, dtype=np.float32, momentum=BN_MOMENTUM):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum

    def copy(self):
        st = BNState(len(self.running_mean), self.running_mean.dtype, self.momentum)
        st.running_mean = self.running_mean.copy()
        st.running_var = self.running_var.copy()
        return st


def batch_norm(x, gamma, beta, state, mode="train", eps=BN_EPS):
    """Per-channel standardization; [N,D] normalizes over N, [N,C,H,W] over N,H,W.

    Train mode uses batch statistics and updates the running moments in
    `state`; eval mode reads them. Differentiable in both modes (eval treats
    the moments as constants).
    """
    check_float("batch_norm", x, gamma, beta)
    if eps <= 0:
        raise EngineError(f"batch_norm eps must be positive, got {eps}")
    if mode not in ("train", "eval"):
        raise EngineError(f"batch_norm mode must be 'train' or 'eval', got {mode!r}")
    if x.ndim == 2:
        axes, ch = (0,), x.shape[1]
        bshape = (1, ch)
    elif x.ndim == 4:
        axes, ch = (0, 2, 3), x.shape[1]
        bshape = (1, ch, 1, 1)
    else:
        raise ShapeError(f"batch_norm expects [N,D] or [N,C,H,W], got {x.shape}")
    if x.shape[0] == 0:
        raise ShapeError("batch_norm on an empty batch")
    if gamma.shape != (ch,) or beta.shape != (ch,):
        raise ShapeError(f"gamma/beta must have shape ({ch},), got {gamma.shape}/{beta.shape}")

    n = x.size // ch
    if mode == "train":
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        ivar = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu.reshape(bshape)) * ivar.reshape(bshape)
        m = state.momentum
        var_unbiased = var * (n / (n - 1)) if n > 1 else var
        state.running_mean = (m * state.running_mean + (1.0 - m) * mu).astype(x.dtype)
        state.running_var = (m * state.running_var + (1.0 - m) * var_unbiased).astype(x.dtype)
    else:
        ivar = 1.0 / np.sqrt(state.running_var + eps)
        xhat = (x.data - state.running_mean.reshape(bshape)) * ivar.reshape(bshape)
    y = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    need_x, need_g, need_b = x.requires_grad, gamma.requires_grad, beta.requires_grad

    def bwd(gy):
        dgamma = (gy * xhat).sum(axis=axes) if need_g else None
        dbeta = gy.sum(axis=axes) if need_b else None
        if not need_x:
            return None, dgamma, dbeta
        giv = gamma.data.reshape(bshape) * ivar.reshape(bshape)
        if mode == "train":
            gmean = gy.mean(axis=axes).reshape(bshape)
            gxhat_mean = (gy * xhat).mean(axis=axes).reshape(bshape)
            dx = giv * (gy - gmean - xhat * gxhat_mean)
        else:
            dx = giv * gy
        return dx.astype(x.dtype, copy=False), dgamma, dbeta

    return _make(y.astype(x.dtype, copy=False), "batch_norm", (x, gamma, beta), bwd)


# ---------------------------------------------------------------------------
# elementwise

def activation(x, kind, slope=0.2):
    """relu | leaky_relu(slope) | tanh | sigmoid, elementwise."""
    check_float("activation", x)
    if kind == "relu":
        y = np.maximum(x.data, 0)
        dydx_from = lambda: (x.data > 0).astype(x.dtype)
    elif kind == "leaky_relu":
        if not 0.0 < slope < 1.0:
            raise EngineError(f"leaky_relu slope must lie in (0,1), got {slope}")
        y = np.where(x.data > 0, x.data, x.data * x.dtype.type(slope))
        dydx_from = lambda: np.where(x.data > 0, x.dtype.type(1), x.dtype.type(slope))
    elif kind == "tanh":
        y = np.tanh(x.data)
        dydx_from = lambda: 1.0 - y * y
    elif kind == "sigmoid":
        # stable two-branch logistic
        y = np.empty_like(x.data)
        pos = x.data >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
        ex = np.exp(x.data[~pos])
        y[~pos] = ex / (1.0 + ex)
        dydx_from = lambda: y * (1.0 - y)
    else:
        raise EngineError(f"unknown activation {kind!r}; choose from {ACTIVATION_KINDS}")

    def bwd(gy):
        return ((gy * dydx_from()).astype(x.dtype, copy=False),)

    return _make(y, f"act_{kind}", (x,), bwd)


def relu(x):
    return activation(x, "relu")


def leaky_relu(x, slope=0.2):
    return activation(x, "leaky_relu", slope)


def tanh(x):
    return activation(x, "tanh")


def sigmoid(x):
    return activation(x, "sigmoid")


# ---------------------------------------------------------------------------
# linear algebra / shape

def affine(x, w, b):
    """x[N,D] @ w[D,M] + b[M]."""
    check_float("affine", x, w, b)
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"affine expects x[N,D], w[D,M], b[M]; got {x.shape}, {w.shape}, {b.shape}")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"affine inner dimensions disagree: {x.shape[1]} vs {w.shape[0]}")
    if b.shape[0] != w.shape[1]:
        raise ShapeError(f"affine bias length {b.shape[0]} != output width {w.shape[1]}")
    y = x.data @ w.data + b.data
    need_x, need_w, need_b = x.requires_grad, w.requires_grad, b.requires_grad

    def bwd(gy):
        gx = gy @ w.data.T if need_x else None
        gw = x.data.T @ gy if need_w else None
        gb = gy.sum(axis=0) if need_b else None
        return gx, gw, gb

    return _make(y, "affine", (x, w, b), bwd)


def reshape(x, shape):
    shape = tuple(shape)
    tgt = int(np.prod(shape)) if -1 not in shape else -1
    if tgt != -1 and tgt != x.size:
        raise ShapeError(f"reshape {x.shape} -> {shape} changes element count")
    old = x.shape
    y = x.data.reshape(shape)

    def bwd(gy):
        return (gy.reshape(old),)

    return _make(y, "reshape", (x,), bwd)


def flatten(x):
    return reshape(x, (x.shape[0], -1))


# ---------------------------------------------------------------------------
# arithmetic and reductions (exact-shape or python-scalar operands)

def _binary(name, a, b, fwd, bwd_a, bwd_b):
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        check_float(name, a, b)
        if a.shape != b.shape:
            raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ (no broadcasting)")
        y = fwd(a.data, b.data)

        def bwd(gy):
            return (bwd_a(gy, a.data, b.data) if a.requires_grad else None,
                    bwd_b(gy, a.data, b.data) if b.requires_grad else None)

        return _make(y, name, (a, b), bwd)
    if isinstance(a, Tensor):
        check_float(name, a)
        bv = a.dtype.type(b)
        y = fwd(a.data, bv)

        def bwd(gy):
            return (bwd_a(gy, a.data, bv),)

        return _make(y, name, (a,), bwd)
    check_float(name, b)
    av = b.dtype.type(a)
    y = fwd(av, b.data)

    def bwd(gy):
        return (bwd_b(gy, av, b.data),)

    return _make(y, name, (b,), bwd)


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def neg(x):
    return mul(x, -1.0)


def log(x):
    check_float("log", x)
    y = np.log(x.data)

    def bwd(gy):
        return (gy / x.data,)

    return _make(y, "log", (x,), bwd)


def clamp(x, lo, hi):
    """Clip to [lo, hi]; gradient passes only where the input was interior."""
    check_float("clamp", x)
    y = np.clip(x.data, lo, hi)

    def bwd(gy):
        mask = ((x.data >= lo) & (x.data <= hi)).astype(x.dtype)
        return (gy * mask,)

    return _make(y, "clamp", (x,), bwd)


def mean(x):
    check_float("mean", x)
    y = np.asarray(x.data.mean(), dtype=x.dtype)
    inv = 1.0 / x.size

    def bwd(gy):
        return (np.full(x.shape, gy * inv, dtype=x.dtype),)

    return _make(y, "mean", (x,), bwd)


def sum_(x):
    check_float("sum", x)
    y = np.asarray(x.data.sum(), dtype=x.dtype)

    def bwd(gy):
        return (np.full(x.shape, gy, dtype=x.dtype),)

    return _make(y, "sum", (x,), bwd)


def cross_entropy_logits(logits, labels):
    """Mean softmax cross-entropy from raw logits; labels are an int vector."""
    check_float("cross_entropy_logits", logits)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy_logits expects [N,K] logits, got {logits.shape}")
    y = np.asarray(labels.data if isinstance(labels, Tensor) else labels)
    if y.shape != (logits.shape[0],):
        raise ShapeError(f"labels shape {y.shape} != ({logits.shape[0]},)")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    ez = np.exp(z - m)
    sez = ez.sum(axis=1, keepdims=True)
    probs = ez / sez
    n = z.shape[0]
    nll = (np.log(sez[:, 0]) + m[:, 0] - z[np.arange(n), y]).mean()

    def bwd(gy):
        g = probs.copy()
        g[np.arange(n), y] -= 1.0
        return ((g * (gy / n)).astype(logits.dtype, copy=False),)

    return _make(np.asarray(nll, dtype=logits.dtype), "cross_entropy_logits", (logits,), bwd)


def softmax_probs(logits):
    """Forward-only row softmax (plain ndarray in/out), for scoring."""
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=1, keepdims=True)
    ez = np.exp(z - m)
    return ez / ez.sum(axis=1, keepdims=True)
