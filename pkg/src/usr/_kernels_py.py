"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and semantics; ``usr.kernels`` picks one at import time.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
MASK64 = (1 << 64) - 1


def splitmix64_block(state, n):
    """Next ``n`` splitmix64 outputs after ``state`` as a uint64 array.

    splitmix64 is counter based: output i is mix(state + (i + 1) * GOLDEN),
    so a block can be generated without a sequential loop.
    """
    idx = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(state & MASK64) + idx * GOLDEN
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def _out_size(size, k, pad, stride):
    return (size + 2 * pad - k) // stride + 1


def im2col(x, k, pad, stride):
    """(N, C, H, W) -> (N, C*k*k, Ho*Wo), rows ordered (c, i, j)."""
    n, c, h, w = x.shape
    ho, wo = _out_size(h, k, pad, stride), _out_size(w, k, pad, stride)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (k, k), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    return np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3)).reshape(n, c * k * k, ho * wo)


def col2im(cols, shape, k, pad, stride):
    """Adjoint of :func:`im2col`: scatter-add columns back to (N, C, H, W)."""
    n, c, h, w = shape
    ho, wo = _out_size(h, k, pad, stride), _out_size(w, k, pad, stride)
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    c6 = cols.reshape(n, c, k, k, ho, wo)
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += c6[:, :, i, j]
    return out[:, :, pad : pad + h, pad : pad + w]


def dwconv_forward(f, u):
    """Per-sample depthwise correlation, zero padded to keep H x W.

    f: (N, C, H, W), u: (N, C, kh, kw).
    """
    n, c, h, w = f.shape
    kh, kw = u.shape[2:]
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    fp = np.pad(f, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros_like(f)
    for m in range(kh):
        for q in range(kw):
            out += fp[:, :, m : m + h, q : q + w] * u[:, :, m, q, None, None]
    return out


def dwconv_backward(f, u, g):
    n, c, h, w = f.shape
    kh, kw = u.shape[2:]
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    fp = np.pad(f, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    dfp = np.zeros_like(fp)
    du = np.empty_like(u)
    for m in range(kh):
        for q in range(kw):
            dfp[:, :, m : m + h, q : q + w] += g * u[:, :, m, q, None, None]
            du[:, :, m, q] = np.einsum("ncij,ncij->nc", fp[:, :, m : m + h, q : q + w], g)
    return dfp[:, :, ph : ph + h, pw : pw + w], du


def correlate_reflect(img, kernel):
    """Per-channel 2-D correlation with reflect-101 borders, same size out."""
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    c, h, w = img.shape
    p = np.pad(img, ((0, 0), (ph, ph), (pw, pw)), mode="reflect")
    out = np.zeros_like(img)
    for i in range(kh):
        for j in range(kw):
            out += kernel[i, j] * p[:, i : i + h, j : j + w]
    return out
