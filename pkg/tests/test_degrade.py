import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import blur_reflect_loops
from usr.degrade import (apply_blur, degrade_pipeline, make_gaussian_kernel, preset, procedural_hr,
                         record_from_json, record_to_json, replay, resize, synth_dataset)
from usr.degrade.noise import add_noise
from usr.degrade.pipeline import DegradationSpec, mode_for_index
from usr.degrade.resize import resize_matrix
from usr.errors import DataError, ParameterError
from usr.nn.rng import DeterministicRng


def rnd(seed, *shape):
    return DeterministicRng(seed, 0, "deg").uniform(shape)


@given(st.sampled_from([7, 9, 13, 21]), st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0, np.pi))
@settings(max_examples=40, deadline=None)
def test_kernel_normalized_nonnegative(size, sx, sy, theta):
    k = make_gaussian_kernel(size, sx, sy, theta).weights
    assert abs(k.sum() - 1.0) <= 1e-9 and (k >= 0).all()


def test_isotropic_kernel_symmetry():
    k = make_gaussian_kernel(9, 1.3, 1.3, 0.7).weights
    assert np.array_equal(k, k.T) and np.array_equal(k, np.rot90(k))


def test_kernel_center_matches_grid_evaluation():
    r = np.arange(-10, 11)
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / 2.0)
    k = make_gaussian_kernel(21, 1.0, 1.0, 0.0).weights
    assert abs(k[10, 10] - 1.0 / g.sum()) < 1e-15


def test_anisotropic_rotation_by_quarter_turn_swaps_axes():
    a = make_gaussian_kernel(11, 2.0, 0.7, 0.0).weights
    b = make_gaussian_kernel(11, 0.7, 2.0, np.pi / 2).weights
    assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("bad", [(7, 0.1, 1.0), (7, 1.0, 3.5), (6, 1.0, 1.0), (23, 1.0, 1.0)])
def test_kernel_param_errors(bad):
    with pytest.raises(ParameterError):
        make_gaussian_kernel(*bad)


@pytest.mark.parametrize("seed", range(5))
def test_blur_matches_reflect_loops(seed):
    img = rnd(seed, 1, 16, 16)
    k = rnd(seed + 50, 7, 7)
    k /= k.sum()
    assert np.abs(apply_blur(img, k) - blur_reflect_loops(img, k)).max() <= 1e-12


def test_blur_constant_and_delta():
    c = np.full((3, 16, 16), 0.3)
    assert np.allclose(apply_blur(c, make_gaussian_kernel(9, 2.0, 1.0, 0.3)), 0.3, atol=1e-15)
    d = np.zeros((7, 7))
    d[3, 3] = 1
    img = rnd(1, 3, 12, 12)
    assert np.array_equal(apply_blur(img, d), img)


def test_blur_kernel_too_large():
    with pytest.raises(ParameterError):
        apply_blur(rnd(0, 1, 8, 8), make_gaussian_kernel(9, 1.0))


@pytest.mark.parametrize("mode", ["bicubic", "bilinear", "area"])
def test_resize_identity_and_constant(mode):
    img = rnd(2, 3, 12, 10)
    assert np.abs(resize(img, 12, 10, mode) - img).max() <= 1e-9
    c = np.full((1, 12, 12), 0.7)
    for h, w in [(4, 5), (30, 17), (12, 6)]:
        assert np.allclose(resize(c, h, w, mode), 0.7, atol=1e-12)


def test_area_integer_ratio_is_block_mean():
    ramp = np.arange(64, dtype=float).reshape(1, 8, 8) / 63
    out = resize(ramp, 4, 4, "area")  # outputs must be >= 4
    ref = ramp.reshape(1, 4, 2, 4, 2).mean(axis=(2, 4))
    assert np.abs(out - ref).max() <= 1e-12
    m = resize_matrix(8, 2, "area")
    assert np.allclose(m @ ramp[0] @ m.T, ramp[0].reshape(2, 4, 2, 4).mean(axis=(1, 3)), atol=1e-12)


def test_bicubic_weights_rows_sum_to_one():
    for n_in, n_out in [(16, 4), (5, 13), (9, 9)]:
        assert np.allclose(resize_matrix(n_in, n_out, "bicubic").sum(axis=1), 1.0, atol=1e-12)


def test_bilinear_upsample_half_pixel_centers():
    m = resize_matrix(2, 4, "bilinear")
    # dst 1 maps to src 0.25, dst 2 to 0.75, ends clamp
    assert np.allclose(m, [[1, 0], [0.75, 0.25], [0.25, 0.75], [0, 1]])


def test_resize_errors():
    with pytest.raises(ParameterError):
        resize(rnd(0, 1, 8, 8), 8, 8, "lanczos")
    with pytest.raises(ParameterError):
        resize(rnd(0, 1, 8, 8), 3, 8, "area")


def test_noise_zero_sigma_and_determinism():
    img = rnd(3, 3, 16, 16)
    assert np.array_equal(add_noise(img, "gaussian-color", 0.0, DeterministicRng(1)), img)
    a = add_noise(img, "gaussian-gray", 0.05, DeterministicRng(1, 2, "n"))
    b = add_noise(img, "gaussian-gray", 0.05, DeterministicRng(1, 2, "n"))
    assert np.array_equal(a, b)


def test_noise_std_on_constant():
    out = add_noise(np.full((1, 64, 64), 0.5), "gaussian-color", 0.1, DeterministicRng(4, 0, "std"))
    assert 0.095 <= out.std() <= 0.105


def test_gray_noise_shared_across_channels():
    out = add_noise(np.full((3, 16, 16), 0.5), "gaussian-gray", 0.05, DeterministicRng(4))
    assert np.array_equal(out[0], out[1]) and np.array_equal(out[1], out[2])


def test_noise_errors():
    with pytest.raises(ParameterError):
        add_noise(rnd(0, 1, 8, 8), "gaussian-color", 0.3, DeterministicRng(0))
    with pytest.raises(ParameterError):
        add_noise(rnd(0, 1, 8, 8), "poisson", 0.1, DeterministicRng(0))


def test_small_image_rejected():
    with pytest.raises(DataError):
        add_noise(rnd(0, 1, 4, 8), "gaussian-color", 0.1, DeterministicRng(0))


def test_pipeline_constant_hr_stays_constant():
    spec = DegradationSpec([{"op": "blur", "size": 7, "sigma_x": 1.0}, {"op": "resize", "scale": 0.25, "mode": "area"}])
    lr, rec = degrade_pipeline(np.full((3, 32, 32), 0.4), spec, DeterministicRng(0))
    assert lr.shape == (3, 8, 8) and np.allclose(lr, 0.4, atol=1e-12)


@pytest.mark.parametrize("name", ["bnj", "bn", "bj", "realesrgan"])
def test_replay_bit_exact_through_json(name):
    hr = procedural_hr(64, DeterministicRng(5, 0, "hr"))
    lr, rec = degrade_pipeline(hr, preset(name), DeterministicRng(5, 0, "degrade"))
    back = record_from_json(record_to_json(rec))
    assert np.array_equal(replay(hr, back), lr)
    assert lr.shape == (3, 16, 16) and lr.min() >= 0 and lr.max() <= 1


def test_bnj_record_bookkeeping():
    hr = procedural_hr(64, DeterministicRng(1, 0, "hr"))
    _, rec = degrade_pipeline(hr, preset("bnj"), DeterministicRng(1, 0, "degrade"))
    ops = [s["op"] for s in rec["stages"] if s["order"] == 1]
    assert ops.count("blur") == 1 and ops.count("noise") == 1 and ops.count("jpeg") == 1
    assert rec["mode"] == "bnj" and rec["orders"] == 1 and rec["stream"] == [1, 0, "degrade"]
    noise = next(s for s in rec["stages"] if s["op"] == "noise")
    assert 1 / 255 <= noise["sigma"] <= 30 / 255
    jp = next(s for s in rec["stages"] if s["op"] == "jpeg")
    assert 30 <= jp["quality"] <= 95


def test_record_json_uses_17_digits():
    text = record_to_json({"x": 0.1, "y": [1.0 / 3.0]})
    assert "0.10000000000000001" in text and "0.33333333333333331" in text
    assert json.loads(text)["y"][0] == 1.0 / 3.0


def test_pipeline_divisibility_error():
    with pytest.raises(DataError):
        degrade_pipeline(np.zeros((3, 30, 30)), preset("bn"), DeterministicRng(0))


def test_second_order_probability():
    hr = procedural_hr(32, DeterministicRng(0, 0, "hr"))
    orders = [degrade_pipeline(hr, preset("realesrgan"), DeterministicRng(0, i, "d"))[1]["orders"]
              for i in range(40)]
    assert set(orders) == {1, 2}


def test_synth_dataset_shapes_range_determinism():
    a = synth_dataset(8, 64, "bnj", 7)
    b = synth_dataset(8, 64, "bnj", 7)
    for (h1, l1, r1), (h2, l2, r2) in zip(a, b):
        assert np.array_equal(h1, h2) and np.array_equal(l1, l2) and r1 == r2
        assert l1.shape == (3, 16, 16) and h1.min() >= 0 and h1.max() <= 1


def test_mixed_mode_cycles_presets():
    assert [mode_for_index("mixed", i) for i in range(4)] == ["bnj", "bn", "bj", "bnj"]
    labels = [r["mode"] for _, _, r in synth_dataset(3, 32, "mixed", 0)]
    assert labels == ["bnj", "bn", "bj"]
