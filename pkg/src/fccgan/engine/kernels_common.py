"""Padding/window helpers shared by both conv backends.

Transposed conv uses a "full scatter" buffer of size (in-1)*stride + kernel
per axis; the visible output is the window starting at pad_lo, zero-extended
at the trailing edge when output_pad reaches past the buffer.
"""

import numpy as np


def pad_hw(x, lo, hi):
    """Zero-pad the two trailing (spatial) axes of an NCHW array."""
    if lo == 0 and hi == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (lo, hi), (lo, hi)))


def full_scatter_size(in_size, kernel, stride):
    return (in_size - 1) * stride + kernel


def extract_window(buf, lo, oh, ow):
    """Visible output window of a transposed conv from its scatter buffer."""
    n, f, hf, wf = buf.shape
    rh = max(min(oh, hf - lo), 0)
    rw = max(min(ow, wf - lo), 0)
    if rh == oh and rw == ow:
        return np.ascontiguousarray(buf[:, :, lo:lo + oh, lo:lo + ow])
    out = np.zeros((n, f, oh, ow), dtype=buf.dtype)
    out[:, :, :rh, :rw] = buf[:, :, lo:lo + rh, lo:lo + rw]
    return out


def embed_window(gy, lo, hf, wf):
    """Inverse of extract_window: place grad-of-output into the scatter buffer."""
    n, f, oh, ow = gy.shape
    buf = np.zeros((n, f, hf, wf), dtype=gy.dtype)
    rh = max(min(oh, hf - lo), 0)
    rw = max(min(ow, wf - lo), 0)
    buf[:, :, lo:lo + rh, lo:lo + rw] = gy[:, :, :rh, :rw]
    return buf
