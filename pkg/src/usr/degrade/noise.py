import numpy as np

from ..errors import ParameterError
from .image import check_image, clamp01

NOISE_KINDS = ("gaussian-gray", "gaussian-color")
MAX_SIGMA = 50 / 255


def add_noise(img, kind, sigma, rng):
    """Additive Gaussian noise, clamped to [0, 1].

    gaussian-gray draws H*W normals (row-major) shared by all channels;
    gaussian-color draws C*H*W normals (channel-major). The draws are consumed
    even when sigma is 0, keeping downstream streams aligned.
    """
    img = check_image(img)
    if not 0.0 <= sigma <= MAX_SIGMA + 1e-12:
        raise ParameterError(f"noise sigma {sigma} outside [0, 50/255]")
    c, h, w = img.shape
    if kind == "gaussian-gray":
        n = rng.normal((1, h, w))
    elif kind == "gaussian-color":
        n = rng.normal((c, h, w))
    else:
        raise ParameterError(f"unknown noise kind {kind!r}")
    return clamp01(img + sigma * n)
