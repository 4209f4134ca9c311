"""Binary checkpoint format.

Layout (all integers little-endian)::

    "USRC"                      4-byte magic
    version        u32
    entry count    u32
    entry*:
        name length  u16
        name         UTF-8 bytes
        dtype        u8   (0 = float32, 1 = float64)
        ndim         u8
        dims         u32 * ndim
        payload      row-major little-endian values
    crc32          u32  IEEE CRC of every byte after the magic and before this field

Model tensors come first in model order. Optional optimizer state follows
under names prefixed ``optim.``: scalars ``optim.step``, ``optim.lr``,
``optim.beta1``, ``optim.beta2``, ``optim.eps`` and per-tensor moments
``optim.m.<name>`` / ``optim.v.<name>``.
"""
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CorruptCheckpointError, IncompatibleCheckpointError
from .nn.optim import AdamState

MAGIC = b"USRC"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}
_OPTIM_SCALARS = ("step", "lr", "beta1", "beta2", "eps")


@dataclass
class Checkpoint:
    params: dict
    optim: AdamState = None

    def to_bytes(self):
        entries = list(self.params.items())
        if self.optim is not None:
            st = self.optim
            for key in _OPTIM_SCALARS:
                entries.append((f"optim.{key}", np.asarray(float(getattr(st, key)), dtype=np.float64)))
            for name in self.params:
                if name in st.m:
                    entries.append((f"optim.m.{name}", st.m[name]))
                    entries.append((f"optim.v.{name}", st.v[name]))
        body = bytearray(struct.pack("<II", VERSION, len(entries)))
        for name, arr in entries:
            arr = np.asarray(arr)
            if arr.dtype not in _CODES:
                raise TypeError(f"unsupported dtype {arr.dtype} for {name}")
            raw = name.encode("utf-8")
            body += struct.pack("<H", len(raw)) + raw
            body += struct.pack("<BB", _CODES[arr.dtype], arr.ndim)
            body += struct.pack(f"<{arr.ndim}I", *arr.shape)
            body += np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[arr.dtype]]).tobytes()
        return MAGIC + bytes(body) + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)

    @classmethod
    def from_bytes(cls, blob):
        if len(blob) < 16 or blob[:4] != MAGIC:
            raise CorruptCheckpointError("not a USRC checkpoint (bad magic or too short)")
        body, crc = blob[4:-4], struct.unpack("<I", blob[-4:])[0]
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise CorruptCheckpointError("checkpoint CRC mismatch (file corrupt or truncated)")
        try:
            version, count = struct.unpack_from("<II", body, 0)
            if version != VERSION:
                raise CorruptCheckpointError(f"unsupported checkpoint version {version}")
            pos = 8
            entries = {}
            for _ in range(count):
                (nlen,) = struct.unpack_from("<H", body, pos)
                pos += 2
                name = body[pos:pos + nlen].decode("utf-8")
                pos += nlen
                code, ndim = struct.unpack_from("<BB", body, pos)
                pos += 2
                dims = struct.unpack_from(f"<{ndim}I", body, pos)
                pos += 4 * ndim
                dt = _DTYPES[code]
                nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
                if pos + nbytes > len(body):
                    raise CorruptCheckpointError(f"payload of {name} runs past end of file")
                entries[name] = np.frombuffer(body, dtype=dt, count=nbytes // dt.itemsize,
                                              offset=pos).reshape(dims).astype(dt.newbyteorder("="))
                pos += nbytes
            if pos != len(body):
                raise CorruptCheckpointError("trailing bytes after last entry")
        except (struct.error, KeyError, UnicodeDecodeError) as exc:
            raise CorruptCheckpointError(f"malformed checkpoint: {exc}") from None

        params = {k: v for k, v in entries.items() if not k.startswith("optim.")}
        optim = None
        if "optim.step" in entries:
            optim = AdamState(**{k: float(entries[f"optim.{k}"]) for k in _OPTIM_SCALARS[1:]})
            optim.step = int(entries["optim.step"])
            for name in params:
                if f"optim.m.{name}" in entries:
                    optim.m[name] = entries[f"optim.m.{name}"]
                    optim.v[name] = entries[f"optim.v.{name}"]
        return cls(params, optim)

    def check_compatible(self, model):
        """Raise IncompatibleCheckpointError naming the first tensor that disagrees."""
        expected = model.parameters()
        bad = []
        for name, p in expected.items():
            if name not in self.params:
                bad.append(f"{name} (missing from checkpoint)")
            elif self.params[name].shape != p.shape:
                bad.append(f"{name} (checkpoint {self.params[name].shape}, model {p.shape})")
        bad += [f"{n} (not in model)" for n in self.params if n not in expected]
        if bad:
            raise IncompatibleCheckpointError(
                f"checkpoint incompatible with model; first mismatch: {bad[0]}"
                + (f" (+{len(bad) - 1} more)" if len(bad) > 1 else ""), bad)

    def equals(self, other):
        return (self.params.keys() == other.params.keys()
                and all(np.array_equal(v, other.params[k]) and v.dtype == other.params[k].dtype
                        for k, v in self.params.items()))


def checkpoint_of(model, optim=None):
    return Checkpoint(model.state(), optim)


def save_checkpoint(model_or_ckpt, path, optim=None):
    ck = model_or_ckpt if isinstance(model_or_ckpt, Checkpoint) else checkpoint_of(model_or_ckpt, optim)
    blob = ck.to_bytes()
    with open(path, "wb") as fh:
        fh.write(blob)
    return ck


def read_checkpoint(path):
    with open(path, "rb") as fh:
        return Checkpoint.from_bytes(fh.read())


def load_checkpoint(path, model):
    """Read, verify and load into ``model``; the model is untouched on any error."""
    ck = read_checkpoint(path)
    ck.check_compatible(model)
    model.load_state(ck.params)
    return ck


def infer_sr_config(ck, **overrides):
    """Recover channels / block counts / scale from tensor names and shapes."""
    from .vddc import SRConfig

    p = ck.params
    if "sr.shallow.weight" not in p:
        raise IncompatibleCheckpointError("checkpoint has no sr.shallow.weight", ["sr.shallow.weight"])
    channels = p["sr.shallow.weight"].shape[0]
    n_vddc = sum(1 for k in p if k.startswith("sr.vddc") and k.endswith(".conv.weight"))
    habs = sum(1 for k in p if k.startswith("sr.vddc0.hab") and k.endswith(".norm1.weight"))
    scale = int(round((p["sr.recon1.weight"].shape[0] / 3) ** 0.5))
    k_dyn = int(round((p["sr.vddc0.ais.weight"].shape[0] / channels) ** 0.5)) if n_vddc else 3
    kw = dict(channels=channels, n_vddc=n_vddc, habs_per_block=habs, scale=scale, k_dyn=k_dyn)
    kw.update(overrides)
    return SRConfig(**kw)


def checkpoint_dtype(ck):
    first = next(iter(ck.params.values()))
    return first.dtype
