import numpy as np

from ..errors import DataError


def check_image(img, min_size=8):
    """Validate a planar C x H x W image with values in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise DataError(f"image must be 1xHxW or 3xHxW, got shape {img.shape}")
    if img.shape[1] < min_size or img.shape[2] < min_size:
        raise DataError(f"image must be at least {min_size}x{min_size}, got {img.shape[1]}x{img.shape[2]}")
    return img


def clamp01(img):
    return np.clip(img, 0.0, 1.0)
