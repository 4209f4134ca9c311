"""Differentiable neural-network operations.

Spatial ops accept either a single ``C x H x W`` map or a batch
``N x C x H x W`` and return the same rank they were given.
"""
import numpy as np
from scipy.special import erf

from .. import kernels
from ..errors import DimensionError, ParameterError
from .tensor import as_tensor, check_finite, make, matmul, mean, tabs

LN_EPS = 1e-5
_SQRT2 = np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _batched(x):
    x = as_tensor(x)
    if x.ndim == 3:
        return x.reshape((1,) + x.shape), True
    if x.ndim == 4:
        return x, False
    raise DimensionError(f"expected C x H x W or N x C x H x W, got shape {x.shape}")


def _unbatch(out, squeeze):
    return out.reshape(out.shape[1:]) if squeeze else out


def conv2d(x, weight, bias=None, padding=0, stride=1):
    """Cross-correlation, ``weight`` shaped C_out x C_in x k x k."""
    x, squeeze = _batched(x)
    weight = as_tensor(weight)
    check_finite(x.data, "conv2d input")
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise DimensionError(f"conv2d weight must be C_out x C_in x k x k, got {weight.shape}")
    cout, cin, k, _ = weight.shape
    if k % 2 == 0:
        raise DimensionError("conv2d kernel size must be odd")
    if padding < 0 or stride < 1:
        raise ParameterError("conv2d needs padding >= 0 and stride >= 1")
    n, c, h, w = x.shape
    if c != cin:
        raise DimensionError(f"conv2d channel mismatch: input {c}, weight {cin}")
    if h + 2 * padding < k or w + 2 * padding < k:
        raise DimensionError("conv2d input smaller than kernel")
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1

    cols = kernels.im2col(x.data, k, padding, stride)
    w2 = weight.data.reshape(cout, cin * k * k)
    out = np.matmul(w2, cols)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise DimensionError(f"conv2d bias must have shape ({cout},)")
        out = out + bias.data[:, None]
        parents.append(bias)
    out = out.reshape(n, cout, ho, wo)

    def backward(g):
        g3 = g.reshape(n, cout, ho * wo)
        gw = np.tensordot(g3, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
        gx = kernels.col2im(np.matmul(w2.T, g3), x.shape, k, padding, stride)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g3.sum(axis=(0, 2)))
        return grads

    return _unbatch(make(out, parents, backward), squeeze)


def depthwise_dynamic_conv(f, u):
    """Per-channel correlation of ``f`` with data-supplied kernels ``u``.

    f: C x H x W (or batched), u: C x h x w (or batched); zero padding keeps
    the spatial size. Gradients flow to both ``f`` and ``u``.
    """
    f, squeeze = _batched(f)
    u, _ = _batched(u)
    if u.shape[0] != f.shape[0] or u.shape[1] != f.shape[1]:
        raise DimensionError(f"dynamic kernel shape {u.shape} does not match features {f.shape}")
    if u.shape[2] % 2 == 0 or u.shape[3] % 2 == 0:
        raise DimensionError("dynamic kernel sides must be odd")
    check_finite(f.data, "dynamic conv input")
    out = kernels.dwconv_forward(f.data, u.data)
    return _unbatch(make(out, (f, u), lambda g: kernels.dwconv_backward(f.data, u.data, g)), squeeze)


def pixel_shuffle(x, r):
    """out[c, y*r+dy, x*r+dx] = in[c*r*r + dy*r + dx, y, x]."""
    x, squeeze = _batched(x)
    n, c, h, w = x.shape
    if c % (r * r):
        raise DimensionError(f"pixel_shuffle: {c} channels not divisible by {r * r}")
    out = x.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return _unbatch(out.reshape(n, c // (r * r), h * r, w * r), squeeze)


def pixel_unshuffle(x, r):
    """Inverse of :func:`pixel_shuffle`."""
    x, squeeze = _batched(x)
    n, c, h, w = x.shape
    if h % r or w % r:
        raise DimensionError(f"pixel_unshuffle: {h}x{w} not divisible by {r}")
    out = x.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return _unbatch(out.reshape(n, c * r * r, h // r, w // r), squeeze)


def linear(x, weight, bias=None):
    """x @ weight.T + bias, weight shaped out x in."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input width {x.shape[-1]} != weight in-dim {weight.shape[1]}")
    out = matmul(x, weight.transpose(1, 0)) if x.ndim >= 2 else matmul(x.reshape(1, -1), weight.transpose(1, 0)).reshape(-1)
    if bias is not None:
        out = out + bias
    return out


def layer_norm(x, gamma, beta, eps=LN_EPS):
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm affine params must have shape ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        dxhat = g * gamma.data
        gx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make(out, (x, gamma, beta), backward)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return make(x.data * mask, (x,), lambda g: (g * mask,))


def leaky_relu(x, slope=0.1):
    if not 0.0 < slope < 1.0:
        raise ParameterError("leaky_relu slope must lie in (0, 1)")
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return make(x.data * scale, (x,), lambda g: (g * scale,))


def sigmoid(x):
    x = as_tensor(x)
    # two-sided form avoids overflow in exp
    e = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)
    return make(out, (x,), lambda g: (g * out * (1.0 - out),))


def gelu(x):
    """Exact (erf) GELU."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
    return make((x.data * cdf).astype(x.dtype), (x,), lambda g: ((g * (cdf + x.data * pdf)).astype(x.dtype),))


def activation(kind, x, slope=0.1):
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "gelu":
        return gelu(x)
    raise ParameterError(f"unknown activation {kind!r}")


def softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)
    return make(out, (x,), lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def global_avg_pool(f):
    f = as_tensor(f)
    if f.ndim not in (3, 4):
        raise DimensionError("global_avg_pool expects C x H x W or N x C x H x W")
    return mean(f, axis=(-2, -1))


def window_partition(x, window):
    """(N, H, W, C) tokens -> (N * nWin, window*window, C)."""
    n, h, w, c = x.shape
    x = x.reshape(n, h // window, window, w // window, window, c).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(n * (h // window) * (w // window), window * window, c)


def window_merge(x, n, h, w, window):
    c = x.shape[-1]
    x = x.reshape(n, h // window, w // window, window, window, c).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(n, h, w, c)


def window_msa_tokens(x, wq, bq, wk, bk, wv, bv, wo, bo, window, heads, return_attn=False):
    """Window multi-head self-attention on channel-last tokens (N, H, W, C)."""
    x = as_tensor(x)
    n, h, w, c = x.shape
    if h % window or w % window:
        raise DimensionError(f"feature size {h}x{w} not divisible by window {window}")
    if c % heads:
        raise DimensionError(f"{c} channels not divisible by {heads} heads")
    dh = c // heads
    t = window_partition(x, window)
    b, s = t.shape[0], t.shape[1]

    def split(z):
        return z.reshape(b, s, heads, dh).transpose(0, 2, 1, 3)

    q = split(linear(t, wq, bq))
    k = split(linear(t, wk, bk))
    v = split(linear(t, wv, bv))
    attn = softmax(matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh)), axis=-1)
    o = matmul(attn, v).transpose(0, 2, 1, 3).reshape(b, s, c)
    out = window_merge(linear(o, wo, bo), n, h, w, window)
    return (out, attn) if return_attn else out


def window_msa(f, wq, bq, wk, bk, wv, bv, wo, bo, window, heads, return_attn=False):
    """Window MSA on a C x H x W (or batched) feature map."""
    f, squeeze = _batched(f)
    res = window_msa_tokens(f.transpose(0, 2, 3, 1), wq, bq, wk, bk, wv, bv, wo, bo,
                            window, heads, return_attn)
    out, attn = res if return_attn else (res, None)
    out = _unbatch(out.transpose(0, 3, 1, 2), squeeze)
    return (out, attn) if return_attn else out


def reconstruction_loss(kind, pred, target):
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"loss shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target.data
    if kind == "mse":
        return mean(diff * diff)
    if kind == "l1":
        return mean(tabs(diff))
    raise ParameterError(f"unknown reconstruction loss {kind!r}")
