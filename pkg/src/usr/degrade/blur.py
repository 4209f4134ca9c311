from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ParameterError
from .image import check_image, clamp01

SIGMA_RANGE = (0.2, 3.0)
SIZE_RANGE = (7, 21)


@dataclass
class BlurKernel:
    size: int
    sigma_x: float
    sigma_y: float
    theta: float
    weights: np.ndarray


def make_gaussian_kernel(size, sigma_x, sigma_y=None, theta=0.0):
    """Rotated anisotropic Gaussian sampled at integer offsets, normalized to sum 1."""
    if sigma_y is None:
        sigma_y = sigma_x
    if size % 2 == 0 or not SIZE_RANGE[0] <= size <= SIZE_RANGE[1]:
        raise ParameterError(f"kernel size must be odd and in {SIZE_RANGE}, got {size}")
    for s in (sigma_x, sigma_y):
        if not SIGMA_RANGE[0] <= s <= SIGMA_RANGE[1]:
            raise ParameterError(f"blur sigma {s} outside {SIGMA_RANGE}")
    ax = np.arange(size, dtype=np.float64) - size // 2
    xx, yy = np.meshgrid(ax, ax)
    if sigma_x == sigma_y:
        # isotropic: skip the rotation so the kernel is exactly symmetric
        q = (xx * xx + yy * yy) / (sigma_x * sigma_x)
    else:
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        cov = rot @ np.diag([sigma_x ** 2, sigma_y ** 2]) @ rot.T
        inv = np.linalg.inv(cov)
        q = inv[0, 0] * xx * xx + (inv[0, 1] + inv[1, 0]) * xx * yy + inv[1, 1] * yy * yy
    w = np.exp(-0.5 * q)
    return BlurKernel(size, float(sigma_x), float(sigma_y), float(theta), w / w.sum())


def apply_blur(img, k):
    """Per-channel correlation with reflect-101 borders."""
    img = check_image(img)
    weights = k.weights if isinstance(k, BlurKernel) else np.asarray(k, dtype=np.float64)
    if weights.shape[0] >= min(img.shape[1:]) or weights.shape[1] >= min(img.shape[1:]):
        raise ParameterError(f"kernel {weights.shape} too large for image {img.shape[1:]}")
    return clamp01(kernels.correlate_reflect(img, weights))
