import numpy as np

from ..errors import ParameterError
from .image import check_image, clamp01

MODES = ("bicubic", "bilinear", "area")
CUBIC_A = -0.5


def _cubic(x):
    x = np.abs(x)
    a = CUBIC_A
    return np.where(x <= 1, ((a + 2) * x - (a + 3)) * x * x + 1,
                    np.where(x < 2, ((a * x - 5 * a) * x + 8 * a) * x - 4 * a, 0.0))


def resize_matrix(n_in, n_out, mode):
    """Row-stochastic (n_out x n_in) interpolation matrix along one axis."""
    scale = n_in / n_out
    m = np.zeros((n_out, n_in))
    dst = np.arange(n_out)
    if mode == "area":
        lo, hi = dst * scale, (dst + 1) * scale
        for i in range(n_in):
            m[:, i] = np.clip(np.minimum(hi, i + 1) - np.maximum(lo, i), 0.0, None)
        return m / scale
    src = (dst + 0.5) * scale - 0.5
    base = np.floor(src).astype(int)
    frac = src - base
    if mode == "bilinear":
        taps = [(0, 1.0 - frac), (1, frac)]
    elif mode == "bicubic":
        taps = [(t, _cubic(frac - t)) for t in (-1, 0, 1, 2)]
    else:
        raise ParameterError(f"unknown resize mode {mode!r}; expected one of {MODES}")
    for off, wt in taps:
        np.add.at(m, (dst, np.clip(base + off, 0, n_in - 1)), wt)
    return m


def resize(img, out_h, out_w, mode):
    img = check_image(img, min_size=4)
    if mode not in MODES:
        raise ParameterError(f"unknown resize mode {mode!r}; expected one of {MODES}")
    if out_h < 4 or out_w < 4:
        raise ParameterError("resize output must be at least 4x4")
    my = resize_matrix(img.shape[1], out_h, mode)
    mx = resize_matrix(img.shape[2], out_w, mode)
    return clamp01(np.matmul(np.matmul(my, img), mx.T))
