"""Minimal parameter containers and layers."""
import numpy as np

from . import ops
from .rng import DeterministicRng
from .tensor import Parameter


class Module:
    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, list) and val and isinstance(val[0], Module):
                for i, sub in enumerate(val):
                    yield from sub.named_parameters(f"{prefix}{key}{i}.")

    def parameters(self):
        return dict(self.named_parameters())

    def assign_names(self, prefix=""):
        for name, p in self.named_parameters(prefix):
            p.name = name
        return self

    def initialize(self, seed, prefix=""):
        """He-uniform weights, zero biases, unit layer-norm scales.

        Each tensor draws from its own stream keyed by its name, so the
        result does not depend on construction order.
        """
        for name, p in self.named_parameters(prefix):
            if p.init == "he":
                bound = np.sqrt(6.0 / p.fan_in)
                u = DeterministicRng(seed, 0, "init:" + name).uniform(p.shape)
                p.data = ((2.0 * u - 1.0) * bound).astype(p.dtype)
            elif p.init == "ones":
                p.data = np.ones_like(p.data)
            else:
                p.data = np.zeros_like(p.data)
        return self

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None


def _param(shape, dtype, init, fan_in=None):
    return Parameter(np.zeros(shape, dtype=dtype), init=init, fan_in=fan_in)


class Conv2d(Module):
    def __init__(self, cin, cout, k=3, dtype=np.float64):
        self.weight = _param((cout, cin, k, k), dtype, "he", cin * k * k)
        self.bias = _param((cout,), dtype, "zeros")
        self.padding = k // 2

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, padding=self.padding)


class Linear(Module):
    def __init__(self, fin, fout, dtype=np.float64):
        self.weight = _param((fout, fin), dtype, "he", fin)
        self.bias = _param((fout,), dtype, "zeros")

    def __call__(self, x):
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim, dtype=np.float64):
        self.weight = _param((dim,), dtype, "ones")
        self.bias = _param((dim,), dtype, "zeros")

    def __call__(self, x):
        return ops.layer_norm(x, self.weight, self.bias)


class WindowAttention(Module):
    def __init__(self, dim, window, heads, dtype=np.float64):
        self.q = Linear(dim, dim, dtype)
        self.k = Linear(dim, dim, dtype)
        self.v = Linear(dim, dim, dtype)
        self.proj = Linear(dim, dim, dtype)
        self.window = window
        self.heads = heads

    def __call__(self, tokens):
        return ops.window_msa_tokens(tokens, self.q.weight, self.q.bias, self.k.weight, self.k.bias,
                                     self.v.weight, self.v.bias, self.proj.weight, self.proj.bias,
                                     self.window, self.heads)


class Mlp(Module):
    def __init__(self, dim, ratio=2, dtype=np.float64):
        self.fc1 = Linear(dim, dim * ratio, dtype)
        self.fc2 = Linear(dim * ratio, dim, dtype)

    def __call__(self, x):
        return self.fc2(ops.gelu(self.fc1(x)))
