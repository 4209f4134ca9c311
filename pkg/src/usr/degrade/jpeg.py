"""Pixel-domain JPEG simulation: colour transform, 8x8 DCT, quantization.

No entropy coding and no chroma subsampling; the result is what a baseline
encoder/decoder pair would reconstruct up to integer rounding of samples.
"""
import numpy as np

from ..errors import ParameterError
from .image import check_image, clamp01

LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)

CHROMA_TABLE = np.full((8, 8), 99, dtype=np.int64)
CHROMA_TABLE[:4, :4] = [
    [17, 18, 24, 47],
    [18, 21, 26, 66],
    [24, 26, 56, 99],
    [47, 66, 99, 99],
]

# BT.601 full range, 0..255 scale, chroma offset 128
RGB_TO_YCC = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
YCC_TO_RGB = np.array([
    [1.0, 0.0, 1.402],
    [1.0, -0.344136, -0.714136],
    [1.0, 1.772, 0.0],
])


def _dct_matrix():
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    d = np.cos((2 * n + 1) * k * np.pi / 16) * np.sqrt(2 / 8)
    d[0] /= np.sqrt(2)
    return d


DCT8 = _dct_matrix()


def quality_scale(quality):
    """libjpeg quality -> percentage scale factor."""
    if not 5 <= quality <= 100 or int(quality) != quality:
        raise ParameterError(f"jpeg quality must be an integer in [5, 100], got {quality}")
    quality = int(quality)
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def scaled_table(table, quality):
    scale = quality_scale(quality)
    return np.clip((table * scale + 50) // 100, 1, 255).astype(np.float64)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_blocks(plane, table):
    """DCT, quantize, dequantize and inverse DCT every 8x8 block of a level-shifted plane."""
    h, w = plane.shape
    blocks = plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coef = DCT8 @ blocks @ DCT8.T
    coef = round_half_away(coef / table) * table
    rec = DCT8.T @ coef @ DCT8
    return rec.transpose(0, 2, 1, 3).reshape(h, w)


def jpeg_degrade(img, quality):
    img = check_image(img)
    q = int(quality)
    if q != quality:
        raise ParameterError("jpeg quality must be an integer")
    luma_q, chroma_q = scaled_table(LUMA_TABLE, q), scaled_table(CHROMA_TABLE, q)
    c, h, w = img.shape
    ph, pw = (-h) % 8, (-w) % 8
    x = np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="edge") * 255.0
    if c == 1:
        out = quantize_blocks(x[0] - 128.0, luma_q)[None] + 128.0
    else:
        ycc = np.tensordot(RGB_TO_YCC, x, axes=1)
        ycc[1:] += 128.0
        rec = np.stack([
            quantize_blocks(ycc[0] - 128.0, luma_q) + 128.0,
            quantize_blocks(ycc[1] - 128.0, chroma_q),
            quantize_blocks(ycc[2] - 128.0, chroma_q),
        ])
        out = np.tensordot(YCC_TO_RGB, rec, axes=1)
    return clamp01(out[:, :h, :w] / 255.0)
