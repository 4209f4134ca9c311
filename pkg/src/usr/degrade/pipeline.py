"""Degradation pipeline: sample an operator chain, apply it, record it.

A :class:`DegradationSpec` lists stage descriptors. Every numeric field of a
descriptor is either a fixed value or a ``[lo, hi]`` range sampled per image;
``mode`` and ``kind`` may be a list of choices. Stage descriptors::

    {"op": "blur", "size": 7..21 (odd), "sigma_x": .., "sigma_y": .., "theta": ..}
    {"op": "resize", "scale": .., "mode": "bicubic" | "bilinear" | "area"}
    {"op": "noise", "kind": "gaussian-gray" | "gaussian-color", "sigma": ..}
    {"op": "jpeg", "quality": 5..100}

After the stages, a final resize to exactly HR / final_scale is appended when
the current size differs. The returned record holds every sampled value and
replays bit-exactly through :func:`replay`.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, ParameterError
from ..nn.rng import DeterministicRng
from .blur import apply_blur, make_gaussian_kernel
from .image import check_image
from .jpeg import jpeg_degrade
from .noise import add_noise
from .resize import MODES, resize

RECORD_VERSION = 1
NOISE_SIGMA_RANGE = [1 / 255, 30 / 255]
JPEG_QUALITY_RANGE = [30, 95]

_BLUR = {"op": "blur", "size": [7, 21], "sigma_x": [0.2, 3.0], "sigma_y": [0.2, 3.0],
         "theta": [0.0, math.pi]}
_NOISE = {"op": "noise", "kind": ["gaussian-gray", "gaussian-color"], "sigma": NOISE_SIGMA_RANGE}
_JPEG = {"op": "jpeg", "quality": JPEG_QUALITY_RANGE}


def _down(scale):
    return {"op": "resize", "scale": 1.0 / scale, "mode": list(MODES)}


@dataclass
class DegradationSpec:
    stages: list
    order: str = "first"  # "first", "second" or "random"
    final_scale: int = 4
    second_order_prob: float = 0.5
    label: str = ""
    final_modes: list = field(default_factory=lambda: list(MODES))

    def to_dict(self):
        return {"stages": self.stages, "order": self.order, "final_scale": self.final_scale,
                "second_order_prob": self.second_order_prob, "label": self.label,
                "final_modes": self.final_modes}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


PRESET_NAMES = ("bnj", "bn", "bj")
PRESET_LABELS = {"bnj": "blur+noise+jpeg", "bn": "blur+noise", "bj": "blur+jpeg"}


def preset(name, final_scale=4):
    """Named pipelines; ``bnj``/``bn``/``bj`` are the first-order mode presets."""
    if name == "bnj":
        stages = [_BLUR, _down(final_scale), _NOISE, _JPEG]
    elif name == "bn":
        stages = [_BLUR, _down(final_scale), _NOISE]
    elif name == "bj":
        stages = [_BLUR, _down(final_scale), _JPEG]
    elif name == "realesrgan":
        stages = [_BLUR, {"op": "resize", "scale": [0.5, 1.0], "mode": list(MODES)}, _NOISE, _JPEG]
        return DegradationSpec([dict(s) for s in stages], order="random", final_scale=final_scale,
                               label=name)
    else:
        raise ParameterError(f"unknown degradation preset {name!r}")
    return DegradationSpec([dict(s) for s in stages], order="first", final_scale=final_scale,
                           label=name)


def resolve_spec(spec, final_scale=4):
    if isinstance(spec, DegradationSpec):
        return spec
    if isinstance(spec, str):
        return preset(spec, final_scale)
    if isinstance(spec, dict):
        return DegradationSpec.from_dict(spec)
    raise ParameterError(f"cannot interpret degradation spec {spec!r}")


def _sample(val, rng, integer=False):
    if isinstance(val, (list, tuple)):
        if isinstance(val[0], str):
            return rng.choice(list(val))
        lo, hi = val
        if integer:
            return rng.randint(int(lo), int(hi))
        return rng.uniform_range(float(lo), float(hi))
    return val


def _sample_stage(desc, rng, noise_key, max_kernel=21):
    op = desc["op"]
    if op == "blur":
        size = desc.get("size", 21)
        if isinstance(size, (list, tuple)):
            size = [size[0], max(min(size[1], max_kernel), size[0])]
        size = _sample(size, rng, integer=True)
        if size % 2 == 0:
            size = size + 1 if size < min(21, max_kernel) else size - 1
        sx = _sample(desc["sigma_x"], rng)
        sy = _sample(desc["sigma_y"], rng) if "sigma_y" in desc else sx
        theta = _sample(desc.get("theta", 0.0), rng)
        k = make_gaussian_kernel(size, sx, sy, theta)
        return {"op": "blur", "size": size, "sigma_x": sx, "sigma_y": sy, "theta": theta,
                "weights": k.weights.tolist()}
    if op == "resize":
        return {"op": "resize", "scale": float(_sample(desc["scale"], rng)),
                "mode": _sample(desc.get("mode", "bicubic"), rng)}
    if op == "noise":
        return {"op": "noise", "kind": _sample(desc.get("kind", "gaussian-color"), rng),
                "sigma": float(_sample(desc["sigma"], rng)), "stream": list(noise_key)}
    if op == "jpeg":
        return {"op": "jpeg", "quality": int(_sample(desc["quality"], rng, integer=True))}
    raise ParameterError(f"unknown degradation op {op!r}")


def _apply_stage(img, st):
    op = st["op"]
    if op == "blur":
        return apply_blur(img, np.asarray(st["weights"], dtype=np.float64))
    if op == "resize":
        return resize(img, st["out_h"], st["out_w"], st["mode"])
    if op == "noise":
        return add_noise(img, st["kind"], st["sigma"], DeterministicRng(*st["stream"]))
    if op == "jpeg":
        return jpeg_degrade(img, st["quality"])
    raise ParameterError(f"unknown degradation op {op!r}")


def degrade_pipeline(hr, spec, rng):
    """Degrade ``hr`` by ``spec`` sampling from ``rng``; returns ``(lr, record)``."""
    hr = check_image(hr)
    spec = resolve_spec(spec)
    s = spec.final_scale
    _, h, w = hr.shape
    if h % s or w % s:
        raise DataError(f"HR size {h}x{w} is not a multiple of scale {s}")
    target = (h // s, w // s)
    if spec.order == "first":
        orders = 1
    elif spec.order == "second":
        orders = 2
    elif spec.order == "random":
        orders = 2 if rng.uniform() < spec.second_order_prob else 1
    else:
        raise ParameterError(f"unknown pipeline order {spec.order!r}")

    seed, index, purpose = rng.key
    img = hr
    applied = []
    for o in range(orders):
        for j, desc in enumerate(spec.stages):
            # largest odd kernel that still fits the current image
            fit = min(img.shape[1:]) - 1
            fit -= 1 - fit % 2
            st = _sample_stage(desc, rng, (seed, index, f"{purpose}/noise{o}.{j}"), fit)
            if st["op"] == "resize":
                st["out_h"] = max(4, int(round(img.shape[1] * st["scale"])))
                st["out_w"] = max(4, int(round(img.shape[2] * st["scale"])))
            img = _apply_stage(img, st)
            st["order"] = o + 1
            applied.append(st)
    if img.shape[1:] != target:
        st = {"op": "resize", "scale": target[0] / img.shape[1], "mode": rng.choice(spec.final_modes),
              "out_h": target[0], "out_w": target[1], "order": 0}
        img = _apply_stage(img, st)
        applied.append(st)
    record = {
        "version": RECORD_VERSION,
        "mode": spec.label,
        "orders": orders,
        "final_scale": s,
        "hr_shape": list(hr.shape),
        "stream": [seed, index, purpose],
        "stages": applied,
    }
    return img, record


def replay(hr, record):
    """Re-apply a recorded chain; bit-identical to the original run."""
    img = check_image(hr)
    for st in record["stages"]:
        img = _apply_stage(img, st)
    return img


# --- record serialization -------------------------------------------------

def _fmt(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("records must hold finite numbers")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (list, tuple, dict)) for v in obj):
            return "[" + ", ".join(_fmt(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _fmt(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        items = [f"{pad}{_fmt(str(k), indent, level)}: {_fmt(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def record_to_json(record):
    """JSON text with every float written as 17 significant digits."""
    return _fmt(record, 2, 0) + "\n"


def record_from_json(text):
    return json.loads(text)


# --- procedural dataset ---------------------------------------------------

def procedural_hr(size, rng, channels=3):
    """Four random sinusoidal gratings plus three constant rectangles, min-max normalized."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.zeros((channels, size, size))
    for _ in range(4):
        freq = rng.uniform_range(1.0, size / 6.0) / size
        theta = rng.uniform_range(0.0, math.pi)
        phase = rng.uniform_range(0.0, 2 * math.pi)
        amp = rng.uniform(channels)
        wave = np.sin(2 * math.pi * freq * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)
        img += amp[:, None, None] * wave
    for _ in range(3):
        rh = rng.randint(size // 8, size // 2)
        rw = rng.randint(size // 8, size // 2)
        y0 = rng.randint(0, size - rh)
        x0 = rng.randint(0, size - rw)
        img[:, y0:y0 + rh, x0:x0 + rw] += (2.0 * rng.uniform(channels) - 1.0)[:, None, None] * 2.0
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)


MIXED_MODES = ("bnj", "bn", "bj")


def mode_for_index(mode, index):
    if mode == "mixed":
        return MIXED_MODES[index % len(MIXED_MODES)]
    return mode


def synth_sample(index, size, mode, seed, scale=4):
    hr = procedural_hr(size, DeterministicRng(seed, index, "hr"))
    spec = resolve_spec(mode_for_index(mode, index), scale) if isinstance(mode, str) else resolve_spec(mode, scale)
    lr, record = degrade_pipeline(hr, spec, DeterministicRng(seed, index, "degrade"))
    return hr, lr, record


def synth_dataset(count, size, mode, seed, scale=4, start=0):
    """``count`` procedural (hr, lr, record) triples; ``mode`` may be "mixed"."""
    if size % scale:
        raise DataError(f"size {size} is not a multiple of scale {scale}")
    if count < 1:
        raise DataError("count must be >= 1")
    return [synth_sample(start + i, size, mode, seed, scale) for i in range(count)]
