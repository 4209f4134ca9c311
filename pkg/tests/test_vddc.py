import numpy as np
import pytest

from usr.errors import DimensionError
from usr.model import USRModel
from usr.nn import DeterministicRng, Tensor, no_grad
from usr.nn.gradcheck import grad_check
from usr.vddc import HAB, SRConfig, SRNet, ais_gamma, ais_scale, udr_kernel, usr_forward, vddc_forward

TINY = SRConfig(channels=4, n_vddc=2, habs_per_block=1, window=2, heads=2, scale=2)


def rnd(seed, *shape):
    return DeterministicRng(seed, 0, "vddc").uniform(shape) * 2 - 1


def net(cfg=TINY, seed=0):
    n = SRNet(cfg)
    n.assign_names("sr.").initialize(seed, "sr.")
    return n


def zero_sub_blocks(block):
    for name, p in block.parameters().items():
        if not name.startswith("ais."):
            p.data = np.zeros_like(p.data)


def test_ais_gamma_cases():
    assert float(ais_gamma(rnd(0, 5), np.zeros(5), np.zeros(1)).data) == 0.5
    u = rnd(1, 36)
    assert float(ais_gamma(u, rnd(2, 36) * 0.1, np.array([20.0])).data) > 0.999
    w, b = rnd(3, 36), np.array([0.3])
    dot = 0.0
    for i in range(36):
        dot += u[i] * w[i]
    ref = 1.0 / (1.0 + np.exp(-(dot + 0.3)))
    assert abs(float(ais_gamma(u, w, b).data) - ref) <= 1e-12


def test_ais_gamma_dimension_mismatch():
    with pytest.raises(DimensionError):
        ais_gamma(rnd(0, 5), np.zeros(6), np.zeros(1))


def test_ais_scale():
    u = rnd(4, 9)
    assert np.array_equal(ais_scale(u, 1.0).data, u)
    assert np.array_equal(ais_scale(u, 0.0).data, np.zeros(9))
    assert abs(np.linalg.norm(ais_scale(u, 0.37).data) - 0.37 * np.linalg.norm(u)) < 1e-14


def test_udr_kernel_roundtrip():
    v = rnd(5, 36)
    k = udr_kernel(v, 4, 3)
    assert k.shape == (4, 3, 3) and k.data[1, 2, 0] == v[1 * 9 + 2 * 3 + 0]
    assert np.array_equal(k.data.reshape(-1), v)
    with pytest.raises(DimensionError):
        udr_kernel(rnd(5, 35), 4, 3)


def test_zero_hab_is_identity_and_shape_preserved():
    hab = HAB(TINY, np.float64)
    hab.assign_names().initialize(0)
    x = Tensor(rnd(6, 2, 4, 4, 4))
    assert hab(x).shape == x.shape
    for p in hab.parameters().values():
        p.data = np.zeros_like(p.data)
    assert np.array_equal(hab(x).data, x.data)


def test_hab_gradient_matches_finite_differences():
    hab = HAB(TINY, np.float64)
    hab.assign_names().initialize(3)
    x = Tensor(rnd(7, 1, 4, 4, 4), requires_grad=True)
    probe = rnd(8, 1, 4, 4, 4)
    err = grad_check(lambda t: (hab(t[0]) * probe).sum(), [x], h=1e-6)
    assert err <= 1e-5


def test_vddc_zero_udr_and_zero_weights_identity():
    n = net()
    b = n.vddc[0]
    f = Tensor(rnd(9, 1, 4, 4, 4))
    base = vddc_forward(f, np.zeros((1, 36)), b)
    assert np.array_equal(base.data, vddc_forward(f, None, b).data)  # dynamic branch contributes nothing
    zero_sub_blocks(b)
    assert np.array_equal(vddc_forward(f, np.zeros((1, 36)), b).data, f.data)
    assert vddc_forward(f, rnd(10, 1, 36), b).shape == f.shape


def test_vddc_udr_changes_output():
    n = net()
    f = Tensor(rnd(11, 1, 4, 4, 4))
    a = vddc_forward(f, np.zeros((1, 36)), n.vddc[0]).data
    b = vddc_forward(f, rnd(12, 1, 36), n.vddc[0]).data
    assert np.abs(a - b).max() > 1e-6


def test_vddc_gradient_through_udr():
    n = net(seed=4)
    f = Tensor(rnd(13, 1, 4, 4, 4), requires_grad=True)
    u = Tensor(rnd(14, 1, 36) * 0.3, requires_grad=True)
    probe = rnd(15, 1, 4, 4, 4)
    err = grad_check(lambda t: (vddc_forward(t[0], t[1], n.vddc[0]) * probe).sum(), [f, u], h=1e-6)
    assert err <= 1e-5


def test_usr_forward_shapes_and_determinism():
    cfg = SRConfig()
    model = USRModel(cfg)
    lr = rnd(16, 3, 16, 20)
    with no_grad():
        a = model.forward(lr).data
        b = model.forward(lr).data
    assert a.shape == (3, 64, 80) and np.array_equal(a, b)
    with no_grad():
        batch = model.forward(np.stack([lr, lr * 0.5]))
    assert batch.shape == (2, 3, 64, 80)


def test_usr_forward_errors():
    n = net()
    with pytest.raises(DimensionError):
        usr_forward(rnd(0, 3, 5, 4), np.zeros(36), n)
    with pytest.raises(DimensionError):
        usr_forward(rnd(0, 3, 4, 4), np.zeros(35), n)


def test_branch_nullity_for_zero_udr():
    n = net(seed=2)
    lr = rnd(17, 3, 4, 4)
    with no_grad():
        assert np.array_equal(usr_forward(lr, np.zeros(36), n).data, usr_forward(lr, None, n).data)


def test_gamma_in_open_interval_and_blocks_independent():
    model = USRModel(SRConfig())
    u = model.udr(rnd(18, 3, 16, 16)).data
    before = [float(ais_gamma(u, b.ais.weight, b.ais.bias).data) for b in model.sr.vddc]
    assert all(0 < g < 1 for g in before)
    model.sr.vddc[1].ais.bias.data += 0.5
    after = [float(ais_gamma(u, b.ais.weight, b.ais.bias).data) for b in model.sr.vddc]
    assert after[0] == before[0] and after[1] != before[1]


def test_variants():
    model = USRModel(TINY)
    lr = rnd(19, 3, 16, 16)
    with no_grad():
        outs = {v: model.forward(lr, v).data for v in ("full", "no-ais", "no-aude", "neither")}
        plain = usr_forward(lr, None, model.sr).data
    assert np.array_equal(outs["neither"], plain) and np.array_equal(outs["no-aude"], plain)
    assert np.abs(outs["full"] - outs["no-ais"]).max() > 0
    with pytest.raises(ValueError):
        model.forward(lr, "half")


def test_no_ais_equals_unit_gamma():
    model = USRModel(TINY)
    lr = rnd(20, 3, 16, 16)
    for b in model.sr.vddc:
        b.ais.weight.data[:] = 0
        b.ais.bias.data[:] = 1e3  # sigmoid saturates to exactly 1
    with no_grad():
        assert np.array_equal(model.forward(lr, "full").data, model.forward(lr, "no-ais").data)


def test_super_resolve_clamps_and_pads():
    model = USRModel(TINY)
    out = model.super_resolve(rnd(21, 3, 17, 19) * 0.5 + 0.5)
    assert out.shape == (3, 34, 38) and out.min() >= 0 and out.max() <= 1


def test_full_scale_constructible():
    cfg = SRConfig.full_scale()
    assert cfg.udr_dim == 576 and (cfg.n_vddc, cfg.habs_per_block) == (7, 6)
