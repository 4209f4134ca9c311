import json
import os
import subprocess
import sys

import numpy as np
import pytest

from usr.checkpoint import save_checkpoint
from usr.cli import build_parser, main
from usr.errors import DataError
from usr.imageio import decode_ppm, encode_ppm, read_dataset_dir, read_ppm, write_ppm
from usr.model import USRModel
from usr.nn.rng import DeterministicRng
from usr.vddc import SRConfig

TINY_TRAIN = {"steps1": 2, "steps2": 2, "steps3": 2, "batch_size": 2, "patch": 16, "pair_patch": 16,
              "dataset": {"kind": "procedural", "count": 3, "size": 64, "mode": "mixed"},
              "sr": {"channels": 4, "n_vddc": 1, "habs_per_block": 1, "window": 4, "scale": 4}}


def tree(path):
    out = {}
    for root, _, files in os.walk(path):
        for f in files:
            p = os.path.join(root, f)
            out[os.path.relpath(p, path)] = open(p, "rb").read()
    return out


def test_white_pixel():
    img = decode_ppm(b"P6\n1 1\n255\n\xff\xff\xff")
    assert img.shape == (3, 1, 1) and np.array_equal(img, np.ones((3, 1, 1)))


def test_header_comments_and_roundtrip(tmp_path):
    img = decode_ppm(b"P6 # c\n2 # w\n1\n# x\n255\n\x00\x01\x02\x03\x04\xff")
    assert img[:, 0, 1].tolist() == [3 / 255, 4 / 255, 1.0]
    data = np.round(DeterministicRng(0).uniform((3, 5, 7)) * 255) / 255
    write_ppm(data, tmp_path / "a.ppm")
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), data)
    assert encode_ppm(np.full((3, 1, 1), 2.0)).endswith(b"\xff\xff\xff")


@pytest.mark.parametrize("blob", [b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00", b"P3\n1 1\n255\n1 2 3",
                                  b"P6\n2 2\n255\n\x00\x00", b"P6\n1\n"])
def test_malformed_ppm(blob):
    with pytest.raises(DataError):
        decode_ppm(blob)


def test_maxval_65535_exit_2(tmp_path, capsys):
    (tmp_path / "x.ppm").write_bytes(b"P6\n1 1\n65535\n" + b"\x00" * 6)
    ck = tmp_path / "m.usrc"
    save_checkpoint(USRModel(), ck)
    assert main(["sr", "--ckpt", str(ck), "--in", str(tmp_path / "x.ppm"), "--out", str(tmp_path / "y.ppm")]) == 2
    assert "65535" in capsys.readouterr().err


def test_synth_twice_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["synth", "--count", "8", "--size", "64", "--mode", "bnj", "--seed", "7",
                     "--out", str(tmp_path / d)]) == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b and len([k for k in a if k.startswith("hr")]) == 8 and "run.json" in a
    echo = json.loads(capsys.readouterr().out.splitlines()[0])
    assert echo["seed"] == 7 and echo["config"]["mode"] == "bnj"
    items = read_dataset_dir(tmp_path / "a")
    assert items[0][2].shape == (3, 16, 16) and items[0][3]["mode"] == "bnj"


def test_degrade_directory(tmp_path):
    main(["synth", "--count", "2", "--size", "32", "--mode", "bn", "--out", str(tmp_path / "s")])
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"preset": "bj"}))
    for d in ("o1", "o2"):
        assert main(["degrade", "--config", str(conf), "--in", str(tmp_path / "s"), "--out", str(tmp_path / d),
                     "--seed", "3"]) == 0
    assert tree(tmp_path / "o1") == tree(tmp_path / "o2")
    assert read_dataset_dir(tmp_path / "o1")[1][3]["mode"] == "bj"


def test_missing_checkpoint_exit_2(tmp_path, capsys):
    code = main(["sr", "--ckpt", str(tmp_path / "missing.usrc"), "--in", "x.ppm", "--out", "y.ppm"])
    err = capsys.readouterr().err.strip()
    assert code == 2 and len(err.splitlines()) == 1


def test_corrupt_and_mismatched_checkpoint(tmp_path):
    ck = tmp_path / "m.usrc"
    save_checkpoint(USRModel(), ck)
    write_ppm(np.zeros((3, 16, 16)), tmp_path / "x.ppm")
    blob = bytearray(ck.read_bytes())
    blob[100] ^= 0xFF
    (tmp_path / "bad.usrc").write_bytes(bytes(blob))
    args = ["--in", str(tmp_path / "x.ppm"), "--out", str(tmp_path / "y.ppm")]
    assert main(["sr", "--ckpt", str(tmp_path / "bad.usrc")] + args) == 2
    assert main(["sr", "--ckpt", str(ck)] + args) == 0
    assert read_ppm(tmp_path / "y.ppm").shape == (3, 64, 64)


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["synth", "--count", "2"]) == 1
    assert main(["synth", "--count", "2", "--size", "32", "--out", "o", "--bogus"]) == 1
    assert main(["eval", "--dataset", "d", "--report", "r.csv"]) == 1


def test_help_lists_every_flag(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.choices and "synth" in a.choices)
    for name, sp in sub.choices.items():
        assert main([name, "--help"]) == 0
        text = capsys.readouterr().out
        for action in sp._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)


def test_gradcheck_module_exit_0(capsys):
    assert main(["gradcheck", "--module", "nn"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "conv2d" in out


def test_train_eval_pipeline_deterministic(tmp_path, capsys):
    conf = tmp_path / "t.json"
    conf.write_text(json.dumps(TINY_TRAIN))
    for d in ("a", "b"):
        os.makedirs(tmp_path / d)
        assert main(["train", "--config", str(conf), "--stage", "all", "--ckpt-out", str(tmp_path / d / "m.usrc"),
                     "--log", str(tmp_path / d / "log.csv")]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    main(["synth", "--count", "3", "--size", "64", "--mode", "mixed", "--seed", "1", "--out", str(tmp_path / "ds")])
    for r in ("e1.csv", "e2.csv"):
        assert main(["eval", "--ckpt", str(tmp_path / "a" / "m.usrc"), "--dataset", str(tmp_path / "ds"),
                     "--report", str(tmp_path / r), "--window", "4"]) == 0
    assert (tmp_path / "e1.csv").read_bytes() == (tmp_path / "e2.csv").read_bytes()
    assert main(["eval", "--bicubic", "--dataset", str(tmp_path / "ds"), "--report", str(tmp_path / "b.csv")]) == 0
    assert main(["cluster", "--ckpt", str(tmp_path / "a" / "m.usrc"), "--dataset", str(tmp_path / "ds"),
                 "--report", str(tmp_path / "c.csv"), "--svg", str(tmp_path / "c.svg")]) == 0
    assert (tmp_path / "c.svg").read_text().count("<circle") == 3
    assert main(["stability", "--ckpt", str(tmp_path / "a" / "m.usrc"), "--image",
                 str(tmp_path / "ds" / "lr" / "0000.ppm"), "--patches", "4", "--patch-size", "16",
                 "--report", str(tmp_path / "s.csv")]) == 0
    conf.write_text(json.dumps({**TINY_TRAIN, "stepz": 1}))
    assert main(["train", "--config", str(conf), "--ckpt-out", str(tmp_path / "z.usrc")]) == 2


def test_train_stage_requires_ckpt(tmp_path):
    conf = tmp_path / "t.json"
    conf.write_text(json.dumps(TINY_TRAIN))
    assert main(["train", "--config", str(conf), "--stage", "2", "--ckpt-out", str(tmp_path / "m.usrc")]) == 1


def test_checkpoint_shape_mismatch_exit_2(tmp_path):
    ck = tmp_path / "m.usrc"
    save_checkpoint(USRModel(SRConfig(channels=8)), ck)
    conf = tmp_path / "t.json"
    conf.write_text(json.dumps(TINY_TRAIN))
    assert main(["train", "--config", str(conf), "--stage", "3", "--ckpt-in", str(ck),
                 "--ckpt-out", str(tmp_path / "o.usrc")]) == 2


def test_training_abort_exit_3(tmp_path):
    bad = USRModel(SRConfig(**TINY_TRAIN["sr"]), dtype=np.float32)
    bad.parameters()["sr.recon2.bias"].data[:] = np.nan
    save_checkpoint(bad, tmp_path / "nan.usrc")
    conf = tmp_path / "t.json"
    conf.write_text(json.dumps(TINY_TRAIN))
    out = tmp_path / "last.usrc"
    assert main(["train", "--config", str(conf), "--stage", "3", "--ckpt-in", str(tmp_path / "nan.usrc"),
                 "--ckpt-out", str(out)]) == 3
    assert out.exists()


def test_console_script_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "usr.cli", "sr", "--ckpt", str(tmp_path / "none.usrc"),
                        "--in", "a.ppm", "--out", "b.ppm"], capture_output=True, text=True)
    assert r.returncode == 2 and r.stderr.startswith("error:")
