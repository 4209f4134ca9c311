"""Synthetic LR generation: blur, resize, noise and JPEG, with replayable records."""
from .blur import BlurKernel, apply_blur, make_gaussian_kernel
from .image import check_image
from .jpeg import jpeg_degrade
from .noise import add_noise
from .pipeline import (PRESET_LABELS, PRESET_NAMES, DegradationSpec, degrade_pipeline, preset,
                       procedural_hr, record_from_json, record_to_json, replay, resolve_spec,
                       synth_dataset, synth_sample)
from .resize import resize

__all__ = [
    "BlurKernel", "DegradationSpec", "PRESET_LABELS", "PRESET_NAMES", "add_noise", "apply_blur",
    "check_image", "degrade_pipeline", "jpeg_degrade", "make_gaussian_kernel", "preset",
    "procedural_hr", "record_from_json", "record_to_json", "replay", "resize", "resolve_spec",
    "synth_dataset", "synth_sample",
]
