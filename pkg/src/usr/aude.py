"""Degradation Extractor, uncertainty head and the uncertainty-suppression loss."""
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError
from .nn import Conv2d, Linear, Module, Tensor, as_tensor, global_avg_pool, leaky_relu, relu, sigmoid
from .nn.tensor import clamp, concat, exp, tabs

LOGVAR_MIN, LOGVAR_MAX = -12.0, 4.0
MIN_PATCH = 16


class ConvBlock(Module):
    def __init__(self, width, dtype):
        self.conv1 = Conv2d(width, width, 3, dtype)
        self.conv2 = Conv2d(width, width, 3, dtype)

    def __call__(self, x):
        return self.conv2(relu(self.conv1(x)))


class DegradationExtractor(Module):
    """3x3 conv + ReLU stem, five conv blocks, average pool, 3-layer MLP -> 2d."""

    def __init__(self, udr_dim, width=32, n_blocks=5, hidden=64, dtype=np.float64):
        self.stem = Conv2d(3, width, 3, dtype)
        self.block = [ConvBlock(width, dtype) for _ in range(n_blocks)]
        self.fc1 = Linear(width, hidden, dtype)
        self.fc2 = Linear(hidden, hidden, dtype)
        self.fc3 = Linear(hidden, 2 * udr_dim, dtype)
        self.udr_dim = udr_dim

    def __call__(self, x):
        x = relu(self.stem(x))
        for b in self.block:
            x = b(x)
        h = global_avg_pool(x)
        h = leaky_relu(self.fc1(h), 0.1)
        h = leaky_relu(self.fc2(h), 0.1)
        return leaky_relu(self.fc3(h), 0.1)


class ContrastHead(Module):
    """Linear(2d -> 1) + sigmoid giving the uncertainty-aware weight alpha."""

    def __init__(self, udr_dim, dtype=np.float64):
        self.fc = Linear(2 * udr_dim, 1, dtype)

    def __call__(self, mu, logvar):
        return sigmoid(self.fc(concat([mu, logvar], axis=-1)))


@dataclass
class UncertainUDR:
    mu: Tensor
    logvar: Tensor
    alpha: Tensor

    def udr(self):
        return self.alpha.reshape(self.alpha.shape + (1,)) * self.mu

    def sigma(self):
        return exp(self.logvar * 0.5)


@dataclass
class UncertaintyLossConfig:
    kT: float = 1.0
    lam: float = 0.1
    num_samples: int = 1

    def __post_init__(self):
        if self.kT <= 0 or self.lam < 0 or self.num_samples < 1:
            raise ValueError("need kT > 0, lambda >= 0, num_samples >= 1")


@dataclass
class PatchPair:
    x1: np.ndarray
    x2: np.ndarray
    offset1: tuple
    offset2: tuple


def de_forward(patch, de, contrast):
    """Run the extractor on one patch (3 x h x w) or a batch (N x 3 x h x w)."""
    patch = as_tensor(patch)
    if patch.shape[-1] < MIN_PATCH or patch.shape[-2] < MIN_PATCH:
        raise DataError(f"DE input must be at least {MIN_PATCH}x{MIN_PATCH}, got {patch.shape[-2:]}")
    single = patch.ndim == 3
    if single:
        patch = patch.reshape((1,) + patch.shape)
    h = de(patch)
    d = de.udr_dim
    mu = h[:, :d]
    logvar = clamp(h[:, d:], LOGVAR_MIN, LOGVAR_MAX)
    alpha = contrast(mu, logvar).reshape(-1)
    if single:
        return UncertainUDR(mu.reshape(d), logvar.reshape(d), alpha.reshape(()))
    return UncertainUDR(mu, logvar, alpha)


def sample_udr(stats, z):
    """Reparameterized draw mu + exp(logvar / 2) * z; z is treated as a constant."""
    z = np.asarray(z, dtype=stats.mu.dtype)
    if z.shape != stats.mu.shape:
        raise DimensionError(f"z shape {z.shape} != mu shape {stats.mu.shape}")
    return stats.mu + stats.sigma() * z


def us_loss(s1, s2, z1, z2, cfg=None):
    """Returns ``(loss, l_u, l_ur)`` with loss = l_u - lam * l_ur.

    l_u is the alpha-weighted L1 disagreement of reparameterized samples over
    the d coordinates, divided by kT and averaged over Monte-Carlo draws and
    batch; l_ur = |alpha1 - alpha2| averaged over batch. ``z1``/``z2`` have
    the shape of ``mu`` or carry a leading num_samples axis.
    """
    cfg = cfg or UncertaintyLossConfig()
    if s1.mu.shape != s2.mu.shape:
        raise DimensionError(f"UDR dimension mismatch {s1.mu.shape} vs {s2.mu.shape}")
    z1, z2 = np.asarray(z1), np.asarray(z2)
    if z1.shape == s1.mu.shape:
        z1, z2 = z1[None], z2[None]
    if z1.shape[0] != cfg.num_samples or z2.shape != z1.shape:
        raise DimensionError("z arrays must match mu shape with a leading num_samples axis")
    a1 = s1.alpha.reshape(s1.alpha.shape + (1,))
    a2 = s2.alpha.reshape(s2.alpha.shape + (1,))
    per_row = 1
    total = None
    for k in range(cfg.num_samples):
        diff = a1 * sample_udr(s1, z1[k]) - a2 * sample_udr(s2, z2[k])
        term = tabs(diff).sum(axis=-1)
        per_row = term.size
        total = term if total is None else total + term
    l_u = total.sum() * (1.0 / (cfg.kT * cfg.num_samples * per_row))
    l_ur = tabs(s1.alpha - s2.alpha).sum() * (1.0 / s1.alpha.size)
    return l_u - l_ur * cfg.lam, l_u, l_ur


def sample_patch_pair(lr, patch, rng):
    """Two random crops of the same LR image; the second is redrawn once on a collision."""
    lr = np.asarray(lr)
    _, h, w = lr.shape
    if h < patch or w < patch:
        raise DataError(f"image {h}x{w} smaller than patch {patch}")

    def draw():
        return rng.randint(0, h - patch), rng.randint(0, w - patch)

    o1 = draw()
    o2 = draw()
    if o1 == o2 and (h > patch or w > patch):
        o2 = draw()
    crop = lambda o: lr[:, o[0]:o[0] + patch, o[1]:o[1] + patch]
    return PatchPair(crop(o1), crop(o2), o1, o2)


def infer_udr(lr, de, contrast):
    """Global UDR alpha * mu of a whole image (or batch), no sampling."""
    return de_forward(lr, de, contrast).udr()
