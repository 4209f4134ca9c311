# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Semantics mirror ``usr._kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from cython cimport floating
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL


def splitmix64_block(state, Py_ssize_t n):
    cdef uint64_t s = <uint64_t>(state & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t z
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t i
    for i in range(n):
        s = s + GOLDEN
        z = s
        z = (z ^ (z >> 30)) * MIX1
        z = (z ^ (z >> 27)) * MIX2
        o[i] = z ^ (z >> 31)
    return out


cdef inline Py_ssize_t _out_size(Py_ssize_t size, Py_ssize_t k, Py_ssize_t pad, Py_ssize_t stride) nogil:
    return (size + 2 * pad - k) // stride + 1


def im2col(floating[:, :, :, ::1] x, Py_ssize_t k, Py_ssize_t pad, Py_ssize_t stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = _out_size(h, k, pad, stride), wo = _out_size(w, k, pad, stride)
    dtype = np.float64 if floating is double else np.float32
    out = np.zeros((n, c * k * k, ho * wo), dtype=dtype)
    cdef floating[:, :, ::1] o = out
    cdef Py_ssize_t b, ch, i, j, y, xx, sy, sx, row
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(k):
                    for j in range(k):
                        row = (ch * k + i) * k + j
                        for y in range(ho):
                            sy = y * stride + i - pad
                            if sy < 0 or sy >= h:
                                continue
                            for xx in range(wo):
                                sx = xx * stride + j - pad
                                if 0 <= sx < w:
                                    o[b, row, y * wo + xx] = x[b, ch, sy, sx]
    return out


def col2im(floating[:, :, ::1] cols, shape, Py_ssize_t k, Py_ssize_t pad, Py_ssize_t stride):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t ho = _out_size(h, k, pad, stride), wo = _out_size(w, k, pad, stride)
    dtype = np.float64 if floating is double else np.float32
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] o = out
    cdef Py_ssize_t b, ch, i, j, y, xx, sy, sx, row
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(k):
                    for j in range(k):
                        row = (ch * k + i) * k + j
                        for y in range(ho):
                            sy = y * stride + i - pad
                            if sy < 0 or sy >= h:
                                continue
                            for xx in range(wo):
                                sx = xx * stride + j - pad
                                if 0 <= sx < w:
                                    o[b, ch, sy, sx] += cols[b, row, y * wo + xx]
    return out


def dwconv_forward(floating[:, :, :, ::1] f, floating[:, :, :, ::1] u):
    cdef Py_ssize_t n = f.shape[0], c = f.shape[1], h = f.shape[2], w = f.shape[3]
    cdef Py_ssize_t kh = u.shape[2], kw = u.shape[3]
    cdef Py_ssize_t ph = (kh - 1) // 2, pw = (kw - 1) // 2
    dtype = np.float64 if floating is double else np.float32
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] o = out
    cdef Py_ssize_t b, ch, y, x, m, q, sy, sx
    cdef floating acc
    with nogil:
        for b in range(n):
            for ch in range(c):
                for y in range(h):
                    for x in range(w):
                        acc = 0
                        for m in range(kh):
                            sy = y + m - ph
                            if sy < 0 or sy >= h:
                                continue
                            for q in range(kw):
                                sx = x + q - pw
                                if 0 <= sx < w:
                                    acc = acc + f[b, ch, sy, sx] * u[b, ch, m, q]
                        o[b, ch, y, x] = acc
    return out


def dwconv_backward(floating[:, :, :, ::1] f, floating[:, :, :, ::1] u, floating[:, :, :, ::1] g):
    cdef Py_ssize_t n = f.shape[0], c = f.shape[1], h = f.shape[2], w = f.shape[3]
    cdef Py_ssize_t kh = u.shape[2], kw = u.shape[3]
    cdef Py_ssize_t ph = (kh - 1) // 2, pw = (kw - 1) // 2
    dtype = np.float64 if floating is double else np.float32
    df = np.zeros((n, c, h, w), dtype=dtype)
    du = np.zeros((n, c, kh, kw), dtype=dtype)
    cdef floating[:, :, :, ::1] dfv = df
    cdef floating[:, :, :, ::1] duv = du
    cdef Py_ssize_t b, ch, y, x, m, q, sy, sx
    cdef floating gv
    with nogil:
        for b in range(n):
            for ch in range(c):
                for y in range(h):
                    for x in range(w):
                        gv = g[b, ch, y, x]
                        for m in range(kh):
                            sy = y + m - ph
                            if sy < 0 or sy >= h:
                                continue
                            for q in range(kw):
                                sx = x + q - pw
                                if 0 <= sx < w:
                                    dfv[b, ch, sy, sx] += gv * u[b, ch, m, q]
                                    duv[b, ch, m, q] += gv * f[b, ch, sy, sx]
    return df, du


cdef inline Py_ssize_t _reflect101(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return -i
    if i >= n:
        return 2 * n - 2 - i
    return i


def correlate_reflect(floating[:, :, ::1] img, floating[:, ::1] kernel):
    cdef Py_ssize_t c = img.shape[0], h = img.shape[1], w = img.shape[2]
    cdef Py_ssize_t kh = kernel.shape[0], kw = kernel.shape[1]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    dtype = np.float64 if floating is double else np.float32
    out = np.zeros((c, h, w), dtype=dtype)
    cdef floating[:, :, ::1] o = out
    cdef Py_ssize_t ch, y, x, i, j, sy
    cdef floating acc
    with nogil:
        for ch in range(c):
            for y in range(h):
                for x in range(w):
                    acc = 0
                    for i in range(kh):
                        sy = _reflect101(y + i - ph, h)
                        for j in range(kw):
                            acc = acc + kernel[i, j] * img[ch, sy, _reflect101(x + j - pw, w)]
                    o[ch, y, x] = acc
    return out
