"""Runtime execution of a ModelSpec: parameters + BN state + forward pass."""

from __future__ import annotations

import numpy as np

from .engine import BNState, ConvGeometry, Tensor, ops
from .zoo import ModelSpec, init_parameters


class Network:
    """A ModelSpec bound to concrete parameters and batch-norm state."""

    def __init__(self, spec: ModelSpec, params: dict, bn_states: dict | None = None, dtype=np.float32):
        spec.validate()
        self.spec = spec
        self.params = params
        self.dtype = np.dtype(dtype)
        if bn_states is None:
            bn_states = {}
            shapes = [tuple(spec.input_shape)] + spec.propagate()
            for i, l in enumerate(spec.layers):
                if l.kind == "bn":
                    bn_states[f"L{i:02d}"] = BNState(shapes[i][0], self.dtype)
        self.bn = bn_states

    @classmethod
    def initialize(cls, spec, seed, dtype=np.float32):
        return cls(spec, init_parameters(spec, seed, dtype), dtype=dtype)

    def forward(self, x: Tensor, train: bool) -> Tensor:
        mode = "train" if train else "eval"
        h = x
        for i, l in enumerate(self.spec.layers):
            key = f"L{i:02d}"
            if l.kind == "conv":
                g = ConvGeometry(h.shape[2], h.shape[3], l.kernel, l.stride, l.pad, l.pad_hi, l.out_pad)
                h = ops.conv2d(h, self.params[f"{key}.w"], self.params[f"{key}.b"], g)
            elif l.kind == "convt":
                g = ConvGeometry(h.shape[2], h.shape[3], l.kernel, l.stride, l.pad, l.pad_hi, l.out_pad)
                h = ops.conv_transpose2d(h, self.params[f"{key}.w"], self.params[f"{key}.b"], g)
            elif l.kind == "fc":
                h = ops.affine(h, self.params[f"{key}.w"], self.params[f"{key}.b"])
            elif l.kind == "bn":
                h = ops.batch_norm(h, self.params[f"{key}.gamma"], self.params[f"{key}.beta"], self.bn[key], mode)
            elif l.kind == "reshape":
                h = ops.reshape(h, (h.shape[0],) + tuple(l.dims))
            elif l.kind == "flatten":
                h = ops.flatten(h)
            elif l.kind == "pool":
                h = ops.avg_pool2d(h, l.pool)
            elif l.kind == "act":
                h = ops.activation(h, l.act, l.slope if l.slope else 0.2)
        return h

    def all_state_arrays(self):
        """Named view of every persistent array (parameters + running moments)."""
        out = {}
        for name, t in self.params.items():
            out[name] = t.data
        for key, st in self.bn.items():
            out[f"{key}.running_mean"] = st.running_mean
            out[f"{key}.running_var"] = st.running_var
        return out

    def load_state_arrays(self, arrays):
        for name in self.params:
            self.params[name] = Tensor(arrays[name].astype(self.dtype, copy=False), requires_grad=True)
        for key, st in self.bn.items():
            st.running_mean = arrays[f"{key}.running_mean"].astype(self.dtype, copy=False).copy()
            st.running_var = arrays[f"{key}.running_var"].astype(self.dtype, copy=False).copy()
