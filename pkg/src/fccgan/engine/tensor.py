"""Dense tensors and the gradient tape.

A Tensor wraps a row-major contiguous numpy array (float32, float64 or uint8)
plus a requires_grad flag. Tensors are treated as immutable values once
constructed; only the optimizer rebinds parameter buffers between steps.

Differentiable primitives (see ops.py) record themselves on the innermost
active Tape. backward() replays the tape once in reverse and accumulates
dLoss/dLeaf for every requires_grad leaf it reaches.
"""

from __future__ import annotations

import numpy as np

FLOAT_DTYPES = (np.float32, np.float64)
SUPPORTED_DTYPES = (np.uint8, np.float32, np.float64)


class EngineError(ValueError):
    """Base error for tensor/op contract violations."""


class ShapeError(EngineError):
    pass


class GeometryError(EngineError):
    pass


class Tensor:
    """Dense n-dimensional value. Hashable by identity; data is never shared
    mutably between tensors (ops allocate fresh output buffers)."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in SUPPORTED_DTYPES:
            # integer literals etc. land here; default numeric work is f32
            if np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.float16:
                arr = arr.astype(np.float32)
            elif arr.dtype == np.float64 or np.issubdtype(arr.dtype, np.floating):
                arr = arr.astype(np.float64)
            else:
                raise EngineError(f"unsupported dtype {arr.dtype}")
        if requires_grad and arr.dtype == np.uint8:
            raise EngineError("uint8 tensors never participate in gradient tracking")
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return self.data.item()

    def detach(self):
        """Same buffer, no gradient participation."""
        t = Tensor.__new__(Tensor)
        t.data = self.data
        t.requires_grad = False
        return t

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


class Node:
    """One recorded primitive application."""

    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs          # tuple[Tensor]
        self.output = output          # Tensor
        self.backward = backward      # grad_out -> tuple of grads aligned with inputs (None where not needed)


class Tape:
    """Append-only record of primitive applications.

    Topological by construction (an op's operands exist before the op runs),
    so one reversed sweep visits each node exactly once.
    """

    def __init__(self):
        self.nodes = []
        self._produced = set()   # id() of tensors created by recorded ops

    def record(self, op, inputs, output, backward):
        self.nodes.append(Node(op, inputs, output, backward))
        self._produced.add(id(output))

    def is_leaf(self, t):
        return id(t) not in self._produced

    def __len__(self):
        return len(self.nodes)

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False


_TAPE_STACK: list[Tape] = []


def active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(loss, tape, into=None):
    """Accumulate dLoss/dLeaf for every requires_grad leaf on the tape.

    Returns a dict {Tensor: np.ndarray}. Pass the returned dict back as
    `into` to accumulate across repeated calls.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {loss: np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        gout = grads.pop(node.output, None)
        if gout is None:
            continue
        gins = node.backward(gout)
        for t, g in zip(node.inputs, gins):
            if g is None or not t.requires_grad:
                continue
            acc = grads.get(t)
            # never mutate in place: backward fns may hand out aliased buffers
            grads[t] = g if acc is None else acc + g
    leaf_grads = {t: g for t, g in grads.items() if t.requires_grad and tape.is_leaf(t)}
    if into is None:
        return leaf_grads
    for t, g in leaf_grads.items():
        if t in into:
            into[t] = into[t] + g
        else:
            into[t] = g
    return into


def check_float(name, *tensors):
    """All operands must share one float dtype; uint8 is rejected."""
    dt = tensors[0].dtype
    if dt not in FLOAT_DTYPES:
        raise EngineError(f"{name}: float tensor required, got {dt}")
    for t in tensors[1:]:
        if t.dtype != dt:
            raise EngineError(f"{name}: mixed dtypes {dt} vs {t.dtype}")
    return dt
