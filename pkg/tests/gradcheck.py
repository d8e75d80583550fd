"""Finite-difference gradient checking against the tape's analytic grads.

Everything runs in float64. loss_fn must rebuild the computation from the
given tensors each call; FD probes mutate tensor buffers in place and
restore them, so the closure sees the perturbed values.
"""

import numpy as np

from fccgan.engine import Tape, backward

from oracles import finite_diff


def fd_check(loss_fn, wrt, h=1e-5, exclude=None):
    """Max relative error between analytic and FD grads over `wrt` tensors.

    exclude: optional {tensor: bool mask} marking coordinates to skip
    (e.g. activation inputs near a kink).
    """
    with Tape() as tape:
        loss = loss_fn()
    grads = backward(loss, tape)
    worst = 0.0
    for t in wrt:
        ana = grads.get(t)
        if ana is None:
            ana = np.zeros_like(t.data)
        fd = finite_diff(lambda: float(loss_fn().item()), t.data, h=h).reshape(t.shape)
        keep = np.ones(t.shape, dtype=bool)
        if exclude is not None and t in exclude:
            keep &= ~exclude[t]
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(fd)), 1e-6)
        err = np.abs(ana - fd) / denom
        # absolute agreement at tiny magnitudes is fine
        err[np.abs(ana - fd) < 1e-9] = 0.0
        if keep.any():
            worst = max(worst, float(err[keep].max()))
    return worst
