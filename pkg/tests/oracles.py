"""Independent reference implementations used as test oracles.

These deliberately avoid the production code paths: convolution is a direct
quadruple loop, the transposed convolution is built from zero-stuffing plus
a flipped-kernel unit-stride convolution (not the production scatter/col2im
routes), and gradients come from central finite differences.
"""

import numpy as np


def naive_conv2d(x, w, b, stride, plo, phi):
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (plo, phi), (plo, phi)))
    oh = (h + plo + phi - k) // stride + 1
    ow = (wd + plo + phi - k) // stride + 1
    y = np.zeros((n, f, oh, ow), dtype=x.dtype)
    for i in range(n):
        for j in range(f):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for a in range(k):
                            for bb in range(k):
                                acc += xp[i, ci, oy * stride + a, ox * stride + bb] * w[j, ci, a, bb]
                    y[i, j, oy, ox] = acc + b[j]
    return y


def naive_affine(x, w, b):
    n, d = x.shape
    m = w.shape[1]
    y = np.zeros((n, m), dtype=x.dtype)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(d):
                acc += x[i, t] * w[t, j]
            y[i, j] = acc + b[j]
    return y


def naive_conv_transpose2d(x, w, b, stride, plo, phi, out_pad):
    """Zero-stuff the input, full-pad, and run a flipped-kernel stride-1 conv."""
    n, c, h, wd = x.shape
    _, f, k, _ = w.shape
    hs = (h - 1) * stride + 1
    ws = (wd - 1) * stride + 1
    stuffed = np.zeros((n, c, hs, ws), dtype=x.dtype)
    stuffed[:, :, ::stride, ::stride] = x
    top = k - 1 - plo
    bottom = k - 1 - phi + out_pad
    assert top >= 0 and bottom >= 0, "oracle assumes pads < kernel"
    padded = np.pad(stuffed, ((0, 0), (0, 0), (top, bottom), (top, bottom)))
    wf = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)   # flip space, swap to [F,C,k,k]
    return naive_conv2d(padded, np.ascontiguousarray(wf), b, 1, 0, 0)


def finite_diff(loss_fn, arr, h=1e-5, coords=None):
    """Central-difference gradient of scalar loss_fn() w.r.t. entries of arr.

    Mutates arr in place around each probe and restores it. `coords` limits
    the check to a subset of flat indices (all entries when None).
    """
    flat = arr.reshape(-1)
    coords = list(range(flat.size)) if coords is None else list(coords)
    g = np.zeros(len(coords), dtype=np.float64)
    for out_i, i in enumerate(coords):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        down = loss_fn()
        flat[i] = keep
        g[out_i] = (up - down) / (2 * h)
    return g


def rel_err(a, b, floor=1e-12):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.max(np.abs(a - b) / denom)
