"""Three-stage training: joint MSE, self-supervised DE refinement, L1 fine-tuning.

Step numbers are global across stages (stage 2 continues after the last
stage-1 step), and every random draw comes from a stream keyed by
``(seed, step, purpose)``:

* ``stage{k}/batch``            image indices and crop offsets
* ``stage{k}/batch/degrade{b}``  fresh degradation of crop ``b`` (online datasets)
* ``stage2/z``                  reparameterization noise

A procedural dataset spec with ``"online": true`` re-degrades every HR crop
of stages 1 and 3 with a new draw from its image's preset, so the network
sees far more degradations than the corpus holds. Stage 2 and evaluation use
the stored LR images.
"""
import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .aude import UncertaintyLossConfig, sample_patch_pair, us_loss
from .checkpoint import Checkpoint, checkpoint_of
from .degrade.pipeline import degrade_pipeline, mode_for_index, resolve_spec, synth_dataset
from .errors import DataError, NumericError, ParameterError
from .model import VARIANTS, USRModel
from .nn import AdamState, DeterministicRng, adam_step, reconstruction_loss
from .vddc import SRConfig, usr_forward

log = logging.getLogger(__name__)

COLLAPSE_ALPHA = 0.05
COLLAPSE_LOGVAR = -10.0
COLLAPSE_PATIENCE = 100


def _default_dataset():
    return {"kind": "procedural", "count": 32, "size": 192, "mode": "mixed", "online": True}


@dataclass
class TrainConfig:
    seed: int = 0
    steps1: int = 500
    steps2: int = 300
    steps3: int = 300
    batch_size: int = 4
    patch: int = 48
    pair_patch: int = 32
    lr1: float = 2e-4
    lr2: float = 1e-4
    lr3: float = 5e-5
    lam: float = 0.1
    kT: float = 1.0
    num_samples: int = 1
    dtype: str = "float32"
    variant: str = "full"
    dataset: dict = field(default_factory=_default_dataset)
    sr: SRConfig = field(default_factory=SRConfig)

    def __post_init__(self):
        if isinstance(self.sr, dict):
            self.sr = SRConfig(**self.sr)
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.dtype not in ("float32", "float64"):
            raise ParameterError("dtype must be float32 or float64")
        if min(self.steps1, self.steps2, self.steps3) < 0 or self.batch_size < 1:
            raise ParameterError("step counts must be >= 0 and batch_size >= 1")
        if min(self.lr1, self.lr2, self.lr3) < 0:
            raise ParameterError("learning rates must be >= 0")
        if self.patch % self.sr.window:
            raise ParameterError(f"patch {self.patch} must be a multiple of window {self.sr.window}")
        self.loss_cfg()

    def loss_cfg(self):
        return UncertaintyLossConfig(kT=self.kT, lam=self.lam, num_samples=self.num_samples)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["sr"] = self.sr.to_dict()
        d["dataset"] = dict(self.dataset)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from None

    def stage_offset(self, stage):
        return [0, self.steps1, self.steps1 + self.steps2][stage - 1]


class TrainingAborted(NumericError):
    """Non-finite loss or gradient; ``checkpoint`` holds the last finite parameters."""

    def __init__(self, message, checkpoint, step):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.step = step


LOG_HEADER = ["step", "stage", "loss", "l_u", "l_ur", "alpha1", "alpha2", "mean_logvar", "grad_norm",
              "collapse"]


class MetricsLog:
    def __init__(self):
        self.records = []

    def append(self, **rec):
        if self.records and rec["step"] <= self.records[-1]["step"]:
            raise ValueError("metrics log steps must increase")
        self.records.append(rec)

    def stage(self, k):
        return [r for r in self.records if r["stage"] == k]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for r in self.records:
            w.writerow([_cell(r.get(k)) for k in LOG_HEADER])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


class CollapseMonitor:
    """Flags runs where both alphas stay under 0.05 or mean logvar under -10."""

    def __init__(self, patience=COLLAPSE_PATIENCE):
        self.patience = patience
        self.run = 0
        self.warned = False

    def update(self, alpha1, alpha2, mean_logvar):
        bad = (alpha1 < COLLAPSE_ALPHA and alpha2 < COLLAPSE_ALPHA) or mean_logvar < COLLAPSE_LOGVAR
        self.run = self.run + 1 if bad else 0
        flagged = self.run >= self.patience
        if flagged and not self.warned:
            log.warning("uncertainty head collapse: alpha or logvar degenerate for %d steps", self.run)
            self.warned = True
        return flagged


# --- data -----------------------------------------------------------------

def load_dataset(spec, seed, scale, dtype=np.float64):
    """List of ``(hr, lr)`` arrays from a procedural or directory dataset spec."""
    kind = spec.get("kind", "procedural")
    if kind == "procedural":
        triples = synth_dataset(int(spec.get("count", 32)), int(spec.get("size", 192)),
                                spec.get("mode", "mixed"), int(spec.get("seed", seed)), scale,
                                start=int(spec.get("start", 0)))
        pairs = [(hr, lr) for hr, lr, _ in triples]
    elif kind == "directory":
        from .imageio import read_dataset_dir
        pairs = [(hr, lr) for _, hr, lr, _ in read_dataset_dir(spec["path"])]
    else:
        raise DataError(f"unknown dataset kind {kind!r}")
    if not pairs:
        raise DataError("dataset is empty")
    for hr, lr in pairs:
        if hr.shape[1] != lr.shape[1] * scale or hr.shape[2] != lr.shape[2] * scale:
            raise DataError(f"HR {hr.shape} and LR {lr.shape} disagree with scale {scale}")
    return [(hr.astype(dtype), lr.astype(dtype)) for hr, lr in pairs]


def online_modes(spec, n):
    """Preset label per image when ``spec`` asks for online re-degradation, else None."""
    if not spec.get("online"):
        return None
    if spec.get("kind", "procedural") != "procedural":
        raise ParameterError("online re-degradation needs a procedural dataset")
    start = int(spec.get("start", 0))
    return [mode_for_index(spec.get("mode", "mixed"), start + i) for i in range(n)]


def sample_batch(data, batch, patch, scale, rng, modes=None):
    """Aligned LR/HR crops; LR crops are ``patch`` square, HR ``scale * patch``.

    With ``modes`` the LR crop is made by degrading the HR crop afresh.
    """
    lrs, hrs = [], []
    hp = patch * scale
    for b in range(batch):
        i = rng.randint(0, len(data) - 1)
        hr, lr = data[i]
        if modes is not None:
            _, h, w = hr.shape
            if h < hp or w < hp:
                raise DataError(f"HR image {h}x{w} smaller than training crop {hp}")
            y, x = rng.randint(0, h - hp), rng.randint(0, w - hp)
            crop = hr[:, y:y + hp, x:x + hp]
            seed, index, purpose = rng.key
            low, _ = degrade_pipeline(crop.astype(np.float64), resolve_spec(modes[i], scale),
                                      DeterministicRng(seed, index, f"{purpose}/degrade{b}"))
            lrs.append(low.astype(hr.dtype))
            hrs.append(crop)
            continue
        _, h, w = lr.shape
        if h < patch or w < patch:
            raise DataError(f"LR image {h}x{w} smaller than training patch {patch}")
        y, x = rng.randint(0, h - patch), rng.randint(0, w - patch)
        lrs.append(lr[:, y:y + patch, x:x + patch])
        hrs.append(hr[:, y * scale:(y + patch) * scale, x * scale:(x + patch) * scale])
    return np.stack(lrs), np.stack(hrs)


# --- stages ---------------------------------------------------------------

def build_model(cfg, ckpt=None):
    model = USRModel(cfg.sr, dtype=np.dtype(cfg.dtype), seed=cfg.seed)
    if ckpt is not None:
        ckpt.check_compatible(model)
        model.load_state(ckpt.params)
    return model


def _grad_norm(grads):
    return math.sqrt(math.fsum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))


def _run(model, params, lr, steps, step0, stage, objective, metrics, monitor=None):
    state = AdamState(lr=lr)
    for k in range(steps):
        step = step0 + k + 1
        for p in params.values():
            p.grad = None
        try:
            loss, rec = objective(step)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value}")
            loss.backward()
            grads = {n: p.grad for n, p in params.items() if p.grad is not None}
            adam_step(params, grads, state)
        except NumericError as exc:
            raise TrainingAborted(f"stage {stage} step {step}: {exc}", checkpoint_of(model), step) from None
        rec["grad_norm"] = _grad_norm(grads)
        if monitor is not None:
            rec["collapse"] = monitor.update(rec["alpha1"], rec["alpha2"], rec["mean_logvar"])
        if metrics is not None:
            metrics.append(step=step, stage=stage, loss=value, **rec)
    return state


def _recon_objective(cfg, model, data, stage, kind):
    use_ais = cfg.variant in ("full", "no-aude")
    conditioned = cfg.variant in ("full", "no-ais")
    scale = cfg.sr.scale
    modes = online_modes(cfg.dataset, len(data))

    def objective(step):
        rng = DeterministicRng(cfg.seed, step, f"stage{stage}/batch")
        lr, hr = sample_batch(data, cfg.batch_size, cfg.patch, scale, rng, modes)
        rec = {}
        if conditioned:
            stats = model.stats(lr)
            udr = stats.udr()
            rec["alpha1"] = float(stats.alpha.data.mean())
            rec["mean_logvar"] = float(stats.logvar.data.mean())
        else:
            udr = np.zeros((lr.shape[0], cfg.sr.udr_dim), dtype=lr.dtype)
        out = usr_forward(lr, udr, model.sr, use_ais=use_ais)
        return reconstruction_loss(kind, out, hr), rec

    return objective


def train_stage1(cfg, data, ckpt=None, metrics=None):
    """Joint MSE training of the extractor and SR network."""
    model = build_model(cfg, ckpt)
    params = model.parameters()
    state = _run(model, params, cfg.lr1, cfg.steps1, cfg.stage_offset(1), 1,
                 _recon_objective(cfg, model, data, 1, "mse"), metrics)
    return Checkpoint(model.state(), state)


def train_stage2(cfg, ckpt, data, metrics=None):
    """USLoss refinement of the extractor and alpha head; SR network and AIS frozen.

    Variants without the extractor skip this stage entirely.
    """
    model = build_model(cfg, ckpt)
    if cfg.variant in ("no-aude", "neither"):
        return Checkpoint(model.state(), None)
    params = model.de_params()
    loss_cfg = cfg.loss_cfg()
    d = cfg.sr.udr_dim
    b = cfg.batch_size

    def objective(step):
        rng = DeterministicRng(cfg.seed, step, "stage2/batch")
        x1, x2 = [], []
        for _ in range(b):
            _, lr = data[rng.randint(0, len(data) - 1)]
            pair = sample_patch_pair(lr, cfg.pair_patch, rng)
            x1.append(pair.x1)
            x2.append(pair.x2)
        z = DeterministicRng(cfg.seed, step, "stage2/z").normal((2, loss_cfg.num_samples, b, d))
        s1, s2 = model.stats(np.stack(x1)), model.stats(np.stack(x2))
        loss, l_u, l_ur = us_loss(s1, s2, z[0], z[1], loss_cfg)
        lv = 0.5 * (s1.logvar.data.mean() + s2.logvar.data.mean())
        return loss, {"l_u": float(l_u.data), "l_ur": float(l_ur.data),
                      "alpha1": float(s1.alpha.data.mean()), "alpha2": float(s2.alpha.data.mean()),
                      "mean_logvar": float(lv)}

    state = _run(model, params, cfg.lr2, cfg.steps2, cfg.stage_offset(2), 2, objective, metrics,
                 CollapseMonitor())
    return Checkpoint(model.state(), state)


def train_stage3(cfg, ckpt, data, metrics=None):
    """L1 fine-tuning of every parameter."""
    model = build_model(cfg, ckpt)
    params = model.parameters()
    state = _run(model, params, cfg.lr3, cfg.steps3, cfg.stage_offset(3), 3,
                 _recon_objective(cfg, model, data, 3, "l1"), metrics)
    return Checkpoint(model.state(), state)


def train_all(cfg, data, metrics=None, stages=(1, 2, 3), ckpt=None):
    """Run ``stages`` in order; returns ``{stage: Checkpoint}``."""
    out = {}
    for k in stages:
        if k == 1:
            ckpt = train_stage1(cfg, data, ckpt, metrics)
        elif k == 2:
            ckpt = train_stage2(cfg, _need(ckpt, 2), data, metrics)
        elif k == 3:
            ckpt = train_stage3(cfg, _need(ckpt, 3), data, metrics)
        else:
            raise ParameterError(f"unknown stage {k}")
        out[k] = ckpt
    return out


def _need(ckpt, stage):
    if ckpt is None:
        raise ParameterError(f"stage {stage} needs a checkpoint from the previous stage")
    return ckpt


def write_run_report(cfg, out_dir, **extra):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump({"config": cfg.to_dict(), **extra}, fh, indent=2, sort_keys=True)
        fh.write("\n")
