"""Pure-numpy conv kernels: im2col/col2im plus one BLAS matmul per pass.

Column layout is [N, Ho, Wo, C, k, k] so the matmul against a [F, C*k*k]
weight view needs no extra copies. All kernels preserve the input dtype.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .kernels_common import pad_hw, full_scatter_size, extract_window, embed_window


def _im2col(xp, k, stride, oh, ow):
    """[N,C,Hp,Wp] -> contiguous [N,Ho,Wo,C,k,k] of sliding windows."""
    n, c, hp, wp = xp.shape
    sn, sc, sh, sw = xp.strides
    win = as_strided(
        xp,
        shape=(n, c, oh, ow, k, k),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))


def _col2im(cols, n, c, hp, wp, k, stride, oh, ow):
    """Scatter-add [N,Ho,Wo,C,k,k] windows back to [N,C,Hp,Wp]."""
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    cs = cols.transpose(0, 3, 1, 2, 4, 5)   # [N,C,Ho,Wo,k,k]
    for a in range(k):
        ha = a + stride * oh
        for b in range(k):
            out[:, :, a:ha:stride, b:b + stride * ow:stride] += cs[:, :, :, :, a, b]
    return out


def conv2d_fwd(x, w, stride, plo, phi):
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    oh = (h + plo + phi - k) // stride + 1
    ow = (wd + plo + phi - k) // stride + 1
    xp = pad_hw(x, plo, phi)
    cols = _im2col(xp, k, stride, oh, ow).reshape(n * oh * ow, c * k * k)
    y = cols @ w.reshape(f, -1).T
    return np.ascontiguousarray(y.reshape(n, oh, ow, f).transpose(0, 3, 1, 2))


def conv2d_bwd_input(gy, w, stride, plo, phi, h, wd):
    n, f, oh, ow = gy.shape
    _, c, k, _ = w.shape
    gym = gy.transpose(0, 2, 3, 1).reshape(n * oh * ow, f)
    gcols = (gym @ w.reshape(f, -1)).reshape(n, oh, ow, c, k, k)
    gxp = _col2im(gcols, n, c, h + plo + phi, wd + plo + phi, k, stride, oh, ow)
    return np.ascontiguousarray(gxp[:, :, plo:plo + h, plo:plo + wd])


def conv2d_bwd_weight(gy, x, k, stride, plo, phi):
    n, f, oh, ow = gy.shape
    c = x.shape[1]
    xp = pad_hw(x, plo, phi)
    cols = _im2col(xp, k, stride, oh, ow).reshape(n * oh * ow, c * k * k)
    gym = gy.transpose(0, 2, 3, 1).reshape(n * oh * ow, f)
    return (gym.T @ cols).reshape(f, c, k, k)


def convt2d_fwd(x, w, stride, plo, phi, oh, ow):
    n, c, h, wd = x.shape
    _, f, k, _ = w.shape
    hf = full_scatter_size(h, k, stride)
    wf = full_scatter_size(wd, k, stride)
    xm = x.transpose(0, 2, 3, 1).reshape(n * h * wd, c)
    cols = (xm @ w.reshape(c, -1)).reshape(n, h, wd, f, k, k)
    buf = _col2im(cols, n, f, hf, wf, k, stride, h, wd)
    return extract_window(buf, plo, oh, ow)


def convt2d_bwd_input(gy, w, stride, plo, phi, h, wd):
    n, f = gy.shape[0], gy.shape[1]
    c, _, k, _ = w.shape
    hf = full_scatter_size(h, k, stride)
    wf = full_scatter_size(wd, k, stride)
    buf = embed_window(gy, plo, hf, wf)
    cols = _im2col(buf, k, stride, h, wd).reshape(n * h * wd, f * k * k)
    gx = cols @ w.reshape(c, -1).T
    return np.ascontiguousarray(gx.reshape(n, h, wd, c).transpose(0, 3, 1, 2))


def convt2d_bwd_weight(gy, x, k, stride, plo, phi):
    n, c, h, wd = x.shape
    f = gy.shape[1]
    hf = full_scatter_size(h, k, stride)
    wf = full_scatter_size(wd, k, stride)
    buf = embed_window(gy, plo, hf, wf)
    cols = _im2col(buf, k, stride, h, wd).reshape(n * h * wd, f * k * k)
    xm = x.transpose(0, 2, 3, 1).reshape(n * h * wd, c)
    return (xm.T @ cols).reshape(c, f, k, k)


def avgpool2d_fwd(x, p):
    n, c, h, w = x.shape
    return x.reshape(n, c, h // p, p, w // p, p).mean(axis=(3, 5))


def avgpool2d_bwd(gy, p):
    g = np.repeat(np.repeat(gy, p, axis=2), p, axis=3)
    return g * (1.0 / (p * p))
