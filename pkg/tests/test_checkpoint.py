import struct
import zlib

import numpy as np
import pytest

from usr.checkpoint import (Checkpoint, checkpoint_of, infer_sr_config, load_checkpoint, read_checkpoint,
                            save_checkpoint)
from usr.errors import CorruptCheckpointError, IncompatibleCheckpointError
from usr.model import USRModel
from usr.nn.optim import AdamState
from usr.vddc import SRConfig

SMALL = SRConfig(channels=4, n_vddc=1, habs_per_block=1, window=2, scale=2)


def test_save_load_save_identical(tmp_path):
    m = USRModel(SMALL, seed=3)
    a = save_checkpoint(m, tmp_path / "a.usrc").to_bytes()
    m2 = USRModel(SMALL, seed=4)
    load_checkpoint(tmp_path / "a.usrc", m2)
    save_checkpoint(m2, tmp_path / "b.usrc")
    assert (tmp_path / "a.usrc").read_bytes() == (tmp_path / "b.usrc").read_bytes() == a


def test_header_layout_by_hand():
    ck = Checkpoint({"w": np.array([[1.0, 2.0]], dtype=np.float32)})
    blob = ck.to_bytes()
    body = struct.pack("<II", 1, 1) + struct.pack("<H", 1) + b"w" + struct.pack("<BB", 0, 2)
    body += struct.pack("<2I", 1, 2) + struct.pack("<2f", 1.0, 2.0)
    assert blob == b"USRC" + body + struct.pack("<I", zlib.crc32(body))


def test_float64_entries_and_order_preserved():
    ck = Checkpoint({"b": np.arange(3.0), "a": np.ones((2, 2), dtype=np.float32)})
    back = Checkpoint.from_bytes(ck.to_bytes())
    assert list(back.params) == ["b", "a"] and back.equals(ck)
    assert back.params["b"].dtype == np.float64 and back.params["a"].dtype == np.float32


def test_truncated_file_rejected_model_untouched(tmp_path):
    m = USRModel(SMALL, seed=1)
    path = tmp_path / "t.usrc"
    blob = save_checkpoint(USRModel(SMALL, seed=2), path).to_bytes()
    before = m.state()
    for cut in (3, 40, len(blob) // 2, len(blob) - 1):
        path.write_bytes(blob[:cut])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path, m)
    assert all(np.array_equal(before[k], v) for k, v in m.state().items())


def test_crc_flip_rejected():
    blob = bytearray(checkpoint_of(USRModel(SMALL)).to_bytes())
    blob[len(blob) // 2] ^= 0x01
    with pytest.raises(CorruptCheckpointError, match="CRC"):
        Checkpoint.from_bytes(bytes(blob))
    with pytest.raises(CorruptCheckpointError):
        Checkpoint.from_bytes(b"XXXX" + bytes(blob[4:]))


def test_desk_into_full_scale_names_first_mismatch(tmp_path):
    path = tmp_path / "desk.usrc"
    save_checkpoint(USRModel(SRConfig()), path)
    big = USRModel(SRConfig.full_scale())
    before = big.parameters()["de.fc3.weight"].data.copy()
    with pytest.raises(IncompatibleCheckpointError) as exc:
        load_checkpoint(path, big)
    assert "first mismatch: de.fc3.weight" in str(exc.value)
    assert exc.value.names[0].startswith("de.fc3.weight")
    assert np.array_equal(big.parameters()["de.fc3.weight"].data, before)


def test_missing_and_extra_names():
    m = USRModel(SMALL)
    params = m.state()
    params.pop("sr.recon2.bias")
    params["extra"] = np.zeros(1)
    with pytest.raises(IncompatibleCheckpointError) as exc:
        Checkpoint(params).check_compatible(m)
    assert exc.value.names == ["sr.recon2.bias (missing from checkpoint)", "extra (not in model)"]


def test_optimizer_state_roundtrip(tmp_path):
    m = USRModel(SMALL)
    st = AdamState(lr=3e-4, step=17)
    for k, v in list(m.state().items())[:3]:
        st.m[k], st.v[k] = v * 0.5, v * v
    path = tmp_path / "o.usrc"
    save_checkpoint(m, path, st)
    back = read_checkpoint(path)
    assert back.optim.step == 17 and back.optim.lr == 3e-4 and back.optim.beta2 == 0.99
    assert set(back.optim.m) == set(st.m)
    assert all(np.array_equal(back.optim.v[k], st.v[k]) for k in st.v)
    assert not any(k.startswith("optim.") for k in back.params)
    assert back.to_bytes() == path.read_bytes()


def test_infer_config():
    ck = checkpoint_of(USRModel(SRConfig(channels=8, n_vddc=3, habs_per_block=1)))
    cfg = infer_sr_config(ck, window=8)
    assert (cfg.channels, cfg.n_vddc, cfg.habs_per_block, cfg.scale, cfg.k_dyn, cfg.window) == (8, 3, 1, 4, 3, 8)
    with pytest.raises(IncompatibleCheckpointError):
        infer_sr_config(Checkpoint({"x": np.zeros(1)}))


def test_float32_model_roundtrip(tmp_path):
    m = USRModel(SMALL, dtype=np.float32)
    save_checkpoint(m, tmp_path / "f.usrc")
    back = read_checkpoint(tmp_path / "f.usrc")
    assert all(v.dtype == np.float32 for v in back.params.values())
    assert back.equals(checkpoint_of(m))
