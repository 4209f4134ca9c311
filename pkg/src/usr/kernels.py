"""Hot-kernel dispatch.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementations in ``_kernels_py`` are used. Setting
``USR_PURE_PYTHON=1`` forces the fallback. Results agree across backends to
rounding; determinism is guaranteed within one backend.
"""
import os

import numpy as np

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("USR_PURE_PYTHON", "") != "1":
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get_backend(name):
    if name == "python":
        return _kernels_py
    if name == "cython" and _ckernels is not None:
        return _ckernels
    raise ValueError(f"kernel backend {name!r} not available")


def _c(a, dtype=None):
    return np.ascontiguousarray(a, dtype=dtype)


def splitmix64_block(state, n):
    return _impl.splitmix64_block(state, n)


def im2col(x, k, pad, stride):
    return _impl.im2col(_c(x), k, pad, stride)


def col2im(cols, shape, k, pad, stride):
    return _impl.col2im(_c(cols), tuple(shape), k, pad, stride)


def dwconv_forward(f, u):
    return _impl.dwconv_forward(_c(f), _c(u, f.dtype))


def dwconv_backward(f, u, g):
    return _impl.dwconv_backward(_c(f), _c(u, f.dtype), _c(g, f.dtype))


def correlate_reflect(img, kernel):
    return _impl.correlate_reflect(_c(img), _c(kernel, img.dtype))
