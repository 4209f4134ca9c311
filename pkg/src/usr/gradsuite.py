"""Gradient-check cases for every differentiable operation and the composite USR graph."""
import time

import numpy as np

from . import aude, vddc
from .nn import DeterministicRng, Tensor, grad_check, ops
from .nn.tensor import clamp, concat, exp, tabs

TOLERANCE = 1e-5
GROUPS = ("nn", "aude", "vddc")
# ReLU networks over whole images have many pre-activations near zero; a tiny
# step keeps central differences from straddling those kinks.
KINK_H = 1e-7


def _rand(key, *shape, lo=-1.0, hi=1.0):
    return lo + (hi - lo) * DeterministicRng(11, 0, key).uniform(shape)


def _weighted(out, key):
    """Scalar probe: sum of the output against fixed random weights."""
    return (out * _rand("probe:" + key, *out.shape)).sum()


def _nn_cases():
    c = [
        ("conv2d", lambda t: _weighted(ops.conv2d(t[0], t[1], t[2], padding=1), "conv"),
         [_rand("x", 2, 3, 6, 6), _rand("w", 4, 3, 3, 3), _rand("b", 4)], {}),
        ("conv2d_stride2", lambda t: _weighted(ops.conv2d(t[0], t[1], None, padding=1, stride=2), "convs"),
         [_rand("x", 1, 2, 7, 7), _rand("w", 3, 2, 3, 3)], {}),
        ("depthwise_dynamic_conv", lambda t: _weighted(ops.depthwise_dynamic_conv(t[0], t[1]), "dw"),
         [_rand("f", 2, 3, 5, 5), _rand("u", 2, 3, 3, 3)], {}),
        ("linear", lambda t: _weighted(ops.linear(t[0], t[1], t[2]), "lin"),
         [_rand("x", 3, 5), _rand("w", 4, 5), _rand("b", 4)], {}),
        ("layer_norm", lambda t: _weighted(ops.layer_norm(t[0], t[1], t[2]), "ln"),
         [_rand("x", 2, 3, 6), _rand("g", 6, lo=0.5, hi=1.5), _rand("b", 6)], {}),
        ("window_msa", lambda t: _weighted(ops.window_msa(t[0], *t[1:], window=2, heads=2), "msa"),
         [_rand("f", 1, 4, 4, 4)] + [_rand(f"p{i}", *((4, 4) if i % 2 == 0 else (4,)), lo=-0.5, hi=0.5)
                                     for i in range(8)], {}),
        ("relu", lambda t: _weighted(ops.relu(t[0]), "relu"), [_rand("x", 4, 5)], {}),
        ("leaky_relu", lambda t: _weighted(ops.leaky_relu(t[0], 0.1), "lrelu"), [_rand("x", 4, 5)], {}),
        ("sigmoid", lambda t: _weighted(ops.sigmoid(t[0] * 4.0), "sig"), [_rand("x", 4, 5)], {}),
        ("gelu", lambda t: _weighted(ops.gelu(t[0] * 3.0), "gelu"), [_rand("x", 4, 5)], {}),
        ("softmax", lambda t: _weighted(ops.softmax(t[0] * 2.0, axis=-1), "smax"), [_rand("x", 3, 5)], {}),
        ("global_avg_pool", lambda t: _weighted(ops.global_avg_pool(t[0]), "gap"), [_rand("x", 2, 3, 4, 4)], {}),
        ("pixel_shuffle", lambda t: _weighted(ops.pixel_shuffle(t[0], 2), "ps"), [_rand("x", 1, 8, 3, 3)], {}),
        ("pixel_unshuffle", lambda t: _weighted(ops.pixel_unshuffle(t[0], 2), "pu"), [_rand("x", 1, 2, 4, 4)], {}),
        ("mse_loss", lambda t: ops.reconstruction_loss("mse", t[0], _rand("b", 2, 3, 3)), [_rand("a", 2, 3, 3)], {}),
        ("l1_loss", lambda t: ops.reconstruction_loss("l1", t[0], _rand("b", 2, 3, 3)), [_rand("a", 2, 3, 3)], {}),
        ("matmul", lambda t: _weighted(t[0] @ t[1], "mm"), [_rand("a", 3, 4), _rand("b", 4, 2)], {}),
        ("exp", lambda t: _weighted(exp(t[0]), "exp"), [_rand("x", 3, 4)], {}),
        ("abs", lambda t: _weighted(tabs(t[0]), "abs"), [_rand("x", 3, 4)], {}),
        ("clamp", lambda t: _weighted(clamp(t[0] * 2.0, -1.0, 1.0), "clamp"), [_rand("x", 3, 4)], {}),
        ("concat", lambda t: _weighted(concat([t[0], t[1]], axis=1), "cat"), [_rand("a", 2, 3), _rand("b", 2, 2)], {}),
        ("div", lambda t: _weighted(t[0] / t[1], "div"), [_rand("a", 3, 3), _rand("b", 3, 3, lo=1.0, hi=2.0)], {}),
    ]
    return c


def _small_de(d):
    de = aude.DegradationExtractor(d, width=4, n_blocks=5, hidden=6)
    contrast = aude.ContrastHead(d)
    de.assign_names("de.")
    contrast.assign_names("contrast.")
    de.initialize(3, "de.")
    contrast.initialize(3, "contrast.")
    for p in list(de.parameters().values()) + list(contrast.parameters().values()):
        p.data = p.data * 0.5 + 0.01
    return de, contrast


def _aude_cases():
    d = 4
    z = DeterministicRng(11, 0, "z").normal((2, 2, d))

    def stats_of(t, k):
        return aude.UncertainUDR(t[3 * k], clamp(t[3 * k + 1], aude.LOGVAR_MIN, aude.LOGVAR_MAX),
                                 ops.sigmoid(t[3 * k + 2]))

    def loss_from_stats(t):
        return aude.us_loss(stats_of(t, 0), stats_of(t, 1), z[0], z[1])[0]

    stats_inputs = [_rand("mu1", 2, d), _rand("lv1", 2, d), _rand("a1", 2),
                    _rand("mu2", 2, d), _rand("lv2", 2, d), _rand("a2", 2)]

    de, contrast = _small_de(d)
    params = list(de.parameters().values()) + list(contrast.parameters().values())
    x1, x2 = _rand("x1", 2, 3, 16, 16, lo=0, hi=1), _rand("x2", 2, 3, 16, 16, lo=0, hi=1)

    def net_loss(_):
        s1, s2 = aude.de_forward(x1, de, contrast), aude.de_forward(x2, de, contrast)
        return aude.us_loss(s1, s2, z[0], z[1])[0]

    return [
        ("us_loss(mu,logvar,alpha)", loss_from_stats, stats_inputs, {}),
        ("de_forward+us_loss", net_loss, params, {"max_coords": 8, "h": KINK_H}),
    ]


def _tiny_cfg():
    return vddc.SRConfig(channels=4, n_vddc=1, habs_per_block=1, window=2, heads=2, scale=2)


def _vddc_cases():
    from .model import USRModel

    cfg = _tiny_cfg()
    d = cfg.udr_dim
    block = vddc.VDDCBlock(cfg, np.float64)
    block.assign_names("b.")
    block.initialize(5, "b.")
    f = _rand("f", 1, 4, 4, 4)
    u = _rand("u", 1, d, lo=-0.3, hi=0.3)

    model = USRModel(cfg, seed=5)
    lr = _rand("lr", 2, 3, 16, 16, lo=0, hi=1)
    hr = _rand("hr", 2, 3, 32, 32, lo=0, hi=1)
    z = DeterministicRng(11, 0, "zc").normal((2, 1, 2, d))
    p1, p2 = lr.copy(), lr[:, :, ::-1, :].copy()

    def composite(_):
        sr = model.forward(lr, "full")
        s1, s2 = model.stats(p1), model.stats(p2)
        return ops.reconstruction_loss("mse", sr, hr) + aude.us_loss(s1, s2, z[0], z[1])[0]

    return [
        ("ais_gamma", lambda t: _weighted(vddc.ais_gamma(t[0], t[1], t[2]), "ais"),
         [_rand("u", 2, d), _rand("w", d, lo=-0.3, hi=0.3), _rand("b", 1)], {}),
        ("vddc_forward(f,u)", lambda t: _weighted(vddc.vddc_forward(t[0], t[1], block), "vddc"), [f, u], {"h": 1e-6}),
        ("usr+usloss composite", composite, list(model.parameters().values()), {"max_coords": 4, "h": KINK_H}),
    ]


def run_suite(groups=GROUPS):
    """``[(group, name, max_rel_err, seconds)]`` for the requested groups."""
    rows = []
    for g in groups:
        if g == "nn":
            cases = _nn_cases()
        elif g == "aude":
            cases = _aude_cases()
        elif g == "vddc":
            cases = _vddc_cases()
        else:
            raise ValueError(f"unknown gradcheck group {g!r}")
        for name, fn, inputs, kw in cases:
            t = time.perf_counter()
            inputs = [x if isinstance(x, Tensor) else np.array(x, dtype=np.float64) for x in inputs]
            err = grad_check(fn, inputs, **kw)
            rows.append((g, name, err, time.perf_counter() - t))
    return rows
