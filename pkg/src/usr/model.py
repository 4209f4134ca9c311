"""Full USR parameter set: degradation extractor, contrast head and SR network."""
import numpy as np

from .aude import ContrastHead, DegradationExtractor, de_forward, infer_udr
from .nn import Module, no_grad
from .vddc import SRConfig, SRNet, usr_forward

VARIANTS = ("full", "no-ais", "no-aude", "neither")


class USRModel(Module):
    def __init__(self, cfg=None, dtype=np.float64, seed=0):
        self.cfg = cfg or SRConfig()
        self.dtype = np.dtype(dtype)
        self.de = DegradationExtractor(self.cfg.udr_dim, dtype=dtype)
        self.contrast = ContrastHead(self.cfg.udr_dim, dtype=dtype)
        self.sr = SRNet(self.cfg, dtype=dtype)
        self.assign_names()
        self.initialize(seed)

    def de_params(self):
        return {k: v for k, v in self.parameters().items() if k.startswith(("de.", "contrast."))}

    def sr_params(self):
        return {k: v for k, v in self.parameters().items() if k.startswith("sr.")}

    def stats(self, x):
        return de_forward(x, self.de, self.contrast)

    def udr(self, x):
        return infer_udr(x, self.de, self.contrast)

    def forward(self, lr, variant="full"):
        """SR output for an LR batch under an ablation variant."""
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if variant in ("no-aude", "neither"):
            n = lr.shape[0] if lr.ndim == 4 else 1
            udr = np.zeros((n, self.cfg.udr_dim), dtype=self.dtype)
            if lr.ndim == 3:
                udr = udr[0]
        else:
            udr = self.udr(lr)
        return usr_forward(lr, udr, self.sr, use_ais=variant in ("full", "no-aude"))

    def super_resolve(self, lr, variant="full"):
        """Clamped SR image for emission; pads to the window size and crops back."""
        lr = np.asarray(lr, dtype=self.dtype)
        w = self.cfg.window
        _, h, wd = lr.shape
        ph, pw = (-h) % w, (-wd) % w
        x = np.pad(lr, ((0, 0), (0, ph), (0, pw)), mode="reflect") if ph or pw else lr
        with no_grad():
            out = self.forward(x, variant).data
        s = self.cfg.scale
        return np.clip(out[:, : h * s, : wd * s], 0.0, 1.0).astype(np.float64)

    def state(self):
        return {k: v.data.copy() for k, v in self.parameters().items()}

    def load_state(self, state):
        for k, p in self.parameters().items():
            p.data = np.array(state[k], dtype=p.dtype, copy=True)
