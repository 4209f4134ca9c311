"""Binary PPM (P6, maxval 255) reading/writing and dataset directories.

A dataset directory holds ``hr/NNNN.ppm``, ``lr/NNNN.ppm`` and, for
synthesized data, ``records/NNNN.json`` degradation records.
"""
import json
import os

import numpy as np

from .errors import DataError

_WS = b" \t\r\n"


def _tokens(buf, count):
    """First ``count`` header tokens and the offset just past the last one."""
    out, pos, n = [], 2, len(buf)
    while len(out) < count:
        while pos < n and (buf[pos] in _WS or buf[pos] == ord("#")):
            if buf[pos] == ord("#"):
                while pos < n and buf[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and buf[pos] not in _WS and buf[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise DataError("truncated PPM header")
        out.append(buf[start:pos])
    return out, pos


def decode_ppm(buf):
    if buf[:2] != b"P6":
        raise DataError("not a binary PPM (P6) file")
    toks, pos = _tokens(buf, 3)
    try:
        w, h, maxval = (int(t) for t in toks)
    except ValueError:
        raise DataError("malformed PPM header") from None
    if maxval != 255:
        raise DataError(f"unsupported PPM maxval {maxval} (only 255)")
    if w < 1 or h < 1:
        raise DataError("PPM dimensions must be positive")
    if pos >= len(buf) or buf[pos] not in _WS:
        raise DataError("PPM header must end with one whitespace byte")
    data = buf[pos + 1:]
    if len(data) < w * h * 3:
        raise DataError(f"PPM payload truncated ({len(data)} of {w * h * 3} bytes)")
    px = np.frombuffer(data, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)
    return px.transpose(2, 0, 1).astype(np.float64) / 255.0


def encode_ppm(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise DataError(f"expected 1 or 3 x H x W image, got {img.shape}")
    if img.shape[0] == 1:
        img = np.repeat(img, 3, axis=0)
    q = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    _, h, w = q.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + q.transpose(1, 2, 0).tobytes()


def read_ppm(path):
    try:
        with open(path, "rb") as fh:
            return decode_ppm(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def write_ppm(img, path):
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


def list_ppm(path):
    try:
        return sorted(f for f in os.listdir(path) if f.endswith(".ppm"))
    except OSError as exc:
        raise DataError(f"cannot list {path}: {exc.strerror}") from None


def write_dataset_dir(out, triples, names=None):
    """Write ``(hr, lr, record)`` triples; ``record`` may be None."""
    from .degrade.pipeline import record_to_json

    for sub in ("hr", "lr", "records"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    names = names or [f"{i:04d}" for i in range(len(triples))]
    for name, (hr, lr, rec) in zip(names, triples):
        write_ppm(hr, os.path.join(out, "hr", name + ".ppm"))
        write_ppm(lr, os.path.join(out, "lr", name + ".ppm"))
        if rec is not None:
            with open(os.path.join(out, "records", name + ".json"), "w") as fh:
                fh.write(record_to_json(rec))
    return names


def read_dataset_dir(path):
    """``(name, hr, lr, record)`` per image, sorted by name."""
    hr_dir, lr_dir = os.path.join(path, "hr"), os.path.join(path, "lr")
    if not os.path.isdir(hr_dir) or not os.path.isdir(lr_dir):
        raise DataError(f"{path} is not a dataset directory (needs hr/ and lr/)")
    out = []
    for f in list_ppm(lr_dir):
        name = f[:-4]
        hr_path = os.path.join(hr_dir, f)
        if not os.path.exists(hr_path):
            raise DataError(f"missing HR image for {name}")
        rec_path = os.path.join(path, "records", name + ".json")
        rec = None
        if os.path.exists(rec_path):
            with open(rec_path) as fh:
                try:
                    rec = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise DataError(f"bad record {rec_path}: {exc}") from None
        out.append((name, read_ppm(hr_path), read_ppm(os.path.join(lr_dir, f)), rec))
    if not out:
        raise DataError(f"no images in {lr_dir}")
    return out
