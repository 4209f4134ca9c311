"""Super-resolution network built from Variable Depth Dynamic Convolution blocks."""
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError
from .nn import (Conv2d, LayerNorm, Linear, Mlp, Module, WindowAttention, as_tensor,
                 depthwise_dynamic_conv, pixel_shuffle, relu, sigmoid)
from .nn.module import _param


@dataclass
class SRConfig:
    channels: int = 16
    n_vddc: int = 2
    habs_per_block: int = 2
    window: int = 4
    heads: int = 2
    k_dyn: int = 3
    scale: int = 4
    mlp_ratio: int = 2
    cab_reduction: int = 4

    @property
    def udr_dim(self):
        return self.channels * self.k_dyn * self.k_dyn

    @classmethod
    def full_scale(cls):
        return cls(channels=64, n_vddc=7, habs_per_block=6, window=8, heads=4)

    def to_dict(self):
        return asdict(self)


class ChannelAttention(Module):
    def __init__(self, dim, reduction, dtype):
        self.fc1 = Linear(dim, dim // reduction, dtype)
        self.fc2 = Linear(dim // reduction, dim, dtype)

    def __call__(self, tokens):
        n, h, w, c = tokens.shape
        pooled = tokens.reshape(n, h * w, c).mean(axis=1)
        gate = sigmoid(self.fc2(relu(self.fc1(pooled))))
        return tokens * gate.reshape(n, 1, 1, c)


class HAB(Module):
    """Simplified hybrid attention block on channel-last tokens."""

    CAB_WEIGHT = 0.01

    def __init__(self, cfg, dtype):
        c = cfg.channels
        self.norm1 = LayerNorm(c, dtype)
        self.attn = WindowAttention(c, cfg.window, cfg.heads, dtype)
        self.cab = ChannelAttention(c, cfg.cab_reduction, dtype)
        self.norm2 = LayerNorm(c, dtype)
        self.mlp = Mlp(c, cfg.mlp_ratio, dtype)

    def __call__(self, x):
        y = self.norm1(x)
        x = x + self.attn(y) + self.cab(y) * self.CAB_WEIGHT
        return x + self.mlp(self.norm2(x))


class ResidualGroup(Module):
    def __init__(self, cfg, dtype):
        c = cfg.channels
        self.norm1 = LayerNorm(c, dtype)
        self.attn = WindowAttention(c, cfg.window, cfg.heads, dtype)
        self.norm2 = LayerNorm(c, dtype)
        self.mlp = Mlp(c, cfg.mlp_ratio, dtype)

    def __call__(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class AIS(Module):
    def __init__(self, udr_dim, dtype):
        self.weight = _param((udr_dim,), dtype, "he", udr_dim)
        self.bias = _param((1,), dtype, "zeros")


class VDDCBlock(Module):
    def __init__(self, cfg, dtype):
        self.ais = AIS(cfg.udr_dim, dtype)
        self.hab = [HAB(cfg, dtype) for _ in range(cfg.habs_per_block)]
        self.rg = ResidualGroup(cfg, dtype)
        self.conv = Conv2d(cfg.channels, cfg.channels, 3, dtype)
        self.cfg = cfg


class SRNet(Module):
    def __init__(self, cfg, dtype=np.float64):
        c = cfg.channels
        self.shallow = Conv2d(3, c, 3, dtype)
        self.vddc = [VDDCBlock(cfg, dtype) for _ in range(cfg.n_vddc)]
        self.recon1 = Conv2d(c, 3 * cfg.scale * cfg.scale, 3, dtype)
        self.recon2 = Conv2d(3, 3, 3, dtype)
        self.cfg = cfg


def ais_gamma(u, weight, bias):
    """gamma = sigmoid(W . u + b); scalar per sample."""
    u = as_tensor(u)
    if u.shape[-1] != weight.shape[0]:
        raise DimensionError(f"AIS weight length {weight.shape[0]} != UDR length {u.shape[-1]}")
    return sigmoid((u * weight).sum(axis=-1) + bias.reshape(()))


def ais_scale(u, gamma):
    u, gamma = as_tensor(u), as_tensor(gamma)
    return gamma.reshape(gamma.shape + (1,)) * u


def udr_kernel(v, channels, k):
    """Row-major view of a d-vector (or N x d) as C x k x k dynamic weights."""
    v = as_tensor(v)
    if v.shape[-1] != channels * k * k:
        raise DimensionError(f"UDR length {v.shape[-1]} != {channels}*{k}*{k}")
    return v.reshape(v.shape[:-1] + (channels, k, k))


def vddc_forward(f, u, block, use_ais=True):
    """One VDDC block on N x C x H x W features; ``u`` is N x d (or None to drop the dynamic branch)."""
    cfg = block.cfg
    if u is not None:
        u = as_tensor(u)
        if use_ais:
            u = ais_scale(u, ais_gamma(u, block.ais.weight, block.ais.bias))
        f0 = f + depthwise_dynamic_conv(f, udr_kernel(u, cfg.channels, cfg.k_dyn))
    else:
        f0 = f
    t = f0.transpose(0, 2, 3, 1)
    for hab in block.hab:
        t = hab(t)
    t = block.rg(t)
    return f + block.conv(t.transpose(0, 3, 1, 2))


def usr_forward(lr, udr, net, use_ais=True):
    """LR batch (N x 3 x H x W, or 3 x H x W) -> unclamped SR output at scale s."""
    cfg = net.cfg
    lr = as_tensor(lr)
    single = lr.ndim == 3
    if single:
        lr = lr.reshape((1,) + lr.shape)
        if udr is not None:
            udr = as_tensor(udr).reshape(1, -1)
    if lr.shape[2] % cfg.window or lr.shape[3] % cfg.window:
        raise DimensionError(f"LR size {lr.shape[2:]} not divisible by window {cfg.window}")
    if udr is not None and as_tensor(udr).shape != (lr.shape[0], cfg.udr_dim):
        raise DimensionError(f"UDR shape {as_tensor(udr).shape} != ({lr.shape[0]}, {cfg.udr_dim})")
    shallow = net.shallow(lr)
    x = shallow
    for block in net.vddc:
        x = vddc_forward(x, udr, block, use_ais)
    x = x + shallow
    out = net.recon2(pixel_shuffle(net.recon1(x), cfg.scale))
    return out.reshape(out.shape[1:]) if single else out
