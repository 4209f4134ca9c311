"""Differentiable tensor substrate: autodiff, ops, Adam, RNG, gradient checks."""
from .gradcheck import grad_check
from .module import Conv2d, LayerNorm, Linear, Mlp, Module, WindowAttention
from .ops import (activation, conv2d, depthwise_dynamic_conv, gelu, global_avg_pool, layer_norm,
                  leaky_relu, linear, pixel_shuffle, pixel_unshuffle, reconstruction_loss, relu,
                  sigmoid, softmax, window_msa, window_msa_tokens)
from .optim import AdamState, adam_step
from .rng import DeterministicRng, rng_next_gaussian
from .tensor import Parameter, Tensor, as_tensor, no_grad

__all__ = [
    "AdamState", "Conv2d", "DeterministicRng", "LayerNorm", "Linear", "Mlp", "Module", "Parameter",
    "Tensor", "WindowAttention", "activation", "adam_step", "as_tensor", "conv2d",
    "depthwise_dynamic_conv", "gelu", "global_avg_pool", "grad_check", "layer_norm", "leaky_relu",
    "linear", "no_grad", "pixel_shuffle", "pixel_unshuffle", "reconstruction_loss", "relu",
    "rng_next_gaussian", "sigmoid", "softmax", "window_msa", "window_msa_tokens",
]
