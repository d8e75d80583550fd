"""Numba-jitted conv kernels: direct loops over pre-padded buffers.

Same signatures as kernels_numpy. The jitted inner loops hoist the weight
scalar and keep the output x-index innermost so LLVM can vectorize; padding
and window bookkeeping stay in numpy where they are cheap.
"""

import numpy as np
from numba import njit

from .kernels_common import pad_hw, full_scatter_size, extract_window, embed_window


@njit(cache=True)
def _conv_fwd(xp, w, stride, oh, ow):
    n, c, _, _ = xp.shape
    f, _, k, _ = w.shape
    y = np.zeros((n, f, oh, ow), xp.dtype)
    for i in range(n):
        for j in range(f):
            for ci in range(c):
                for a in range(k):
                    for b in range(k):
                        wv = w[j, ci, a, b]
                        for oy in range(oh):
                            iy = oy * stride + a
                            for ox in range(ow):
                                y[i, j, oy, ox] += wv * xp[i, ci, iy, ox * stride + b]
    return y


@njit(cache=True)
def _conv_bwd_input(gy, w, stride, hp, wp):
    n, f, oh, ow = gy.shape
    _, c, k, _ = w.shape
    gxp = np.zeros((n, c, hp, wp), gy.dtype)
    for i in range(n):
        for j in range(f):
            for ci in range(c):
                for a in range(k):
                    for b in range(k):
                        wv = w[j, ci, a, b]
                        for oy in range(oh):
                            iy = oy * stride + a
                            for ox in range(ow):
                                gxp[i, ci, iy, ox * stride + b] += wv * gy[i, j, oy, ox]
    return gxp


@njit(cache=True)
def _conv_bwd_weight(gy, xp, k, stride):
    n, f, oh, ow = gy.shape
    c = xp.shape[1]
    gw = np.zeros((f, c, k, k), gy.dtype)
    for j in range(f):
        for ci in range(c):
            for a in range(k):
                for b in range(k):
                    acc = gw[j, ci, a, b]
                    for i in range(n):
                        for oy in range(oh):
                            iy = oy * stride + a
                            for ox in range(ow):
                                acc += gy[i, j, oy, ox] * xp[i, ci, iy, ox * stride + b]
                    gw[j, ci, a, b] = acc
    return gw


@njit(cache=True)
def _convt_scatter(x, w, stride, hf, wf):
    n, c, h, wd = x.shape
    _, f, k, _ = w.shape
    buf = np.zeros((n, f, hf, wf), x.dtype)
    for i in range(n):
        for ci in range(c):
            for j in range(f):
                for a in range(k):
                    for b in range(k):
                        wv = w[ci, j, a, b]
                        for iy in range(h):
                            oy = iy * stride + a
                            for ix in range(wd):
                                buf[i, j, oy, ix * stride + b] += wv * x[i, ci, iy, ix]
    return buf


@njit(cache=True)
def _convt_gather_input(buf, w, stride, h, wd):
    n, f = buf.shape[0], buf.shape[1]
    c, _, k, _ = w.shape
    gx = np.zeros((n, c, h, wd), buf.dtype)
    for i in range(n):
        for ci in range(c):
            for j in range(f):
                for a in range(k):
                    for b in range(k):
                        wv = w[ci, j, a, b]
                        for iy in range(h):
                            oy = iy * stride + a
                            for ix in range(wd):
                                gx[i, ci, iy, ix] += wv * buf[i, j, oy, ix * stride + b]
    return gx


@njit(cache=True)
def _convt_gather_weight(buf, x, k, stride):
    n, c, h, wd = x.shape
    f = buf.shape[1]
    gw = np.zeros((c, f, k, k), x.dtype)
    for ci in range(c):
        for j in range(f):
            for a in range(k):
                for b in range(k):
                    acc = gw[ci, j, a, b]
                    for i in range(n):
                        for iy in range(h):
                            oy = iy * stride + a
                            for ix in range(wd):
                                acc += x[i, ci, iy, ix] * buf[i, j, oy, ix * stride + b]
                    gw[ci, j, a, b] = acc
    return gw


def conv2d_fwd(x, w, stride, plo, phi):
    h, wd = x.shape[2], x.shape[3]
    k = w.shape[2]
    oh = (h + plo + phi - k) // stride + 1
    ow = (wd + plo + phi - k) // stride + 1
    return _conv_fwd(pad_hw(x, plo, phi), w, stride, oh, ow)


def conv2d_bwd_input(gy, w, stride, plo, phi, h, wd):
    gxp = _conv_bwd_input(gy, w, stride, h + plo + phi, wd + plo + phi)
    return np.ascontiguousarray(gxp[:, :, plo:plo + h, plo:plo + wd])


def conv2d_bwd_weight(gy, x, k, stride, plo, phi):
    return _conv_bwd_weight(gy, pad_hw(x, plo, phi), k, stride)


def convt2d_fwd(x, w, stride, plo, phi, oh, ow):
    k = w.shape[2]
    hf = full_scatter_size(x.shape[2], k, stride)
    wf = full_scatter_size(x.shape[3], k, stride)
    buf = _convt_scatter(x, w, stride, hf, wf)
    return extract_window(buf, plo, oh, ow)


def convt2d_bwd_input(gy, w, stride, plo, phi, h, wd):
    k = w.shape[2]
    hf = full_scatter_size(h, k, stride)
    wf = full_scatter_size(wd, k, stride)
    buf = embed_window(gy, plo, hf, wf)
    return _convt_gather_input(buf, w, stride, h, wd)


def convt2d_bwd_weight(gy, x, k, stride, plo, phi):
    hf = full_scatter_size(x.shape[2], k, stride)
    wf = full_scatter_size(x.shape[3], k, stride)
    buf = embed_window(gy, plo, hf, wf)
    return _convt_gather_weight(buf, x, k, stride)


# pooling is memory-bound; the numpy reshape/mean route is already optimal
from .kernels_numpy import avgpool2d_fwd, avgpool2d_bwd  # noqa: E402,F401
