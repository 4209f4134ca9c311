"""``usr`` command line: synth, degrade, train, sr, eval, stability, cluster, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data/file error, 3 numeric failure.
All randomness derives from ``--seed`` through stream keys
``(seed, index, purpose)``.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import DataError, NumericError, USRError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _echo(cmd, config, seed):
    print(json.dumps({"command": cmd, "seed": seed, "config": config}, sort_keys=True))


def _write_run_json(out_dir, cmd, config, seed):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump({"command": cmd, "seed": seed, "config": config}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None


# --- subcommands --------------------------------------------------------------

def cmd_synth(a):
    from .degrade.pipeline import synth_dataset
    from .imageio import write_dataset_dir

    cfg = {"count": a.count, "size": a.size, "mode": a.mode, "scale": a.scale}
    _echo("synth", cfg, a.seed)
    triples = synth_dataset(a.count, a.size, a.mode, a.seed, a.scale)
    write_dataset_dir(a.out, triples)
    _write_run_json(a.out, "synth", cfg, a.seed)
    print(f"wrote {len(triples)} samples to {a.out}")


def cmd_degrade(a):
    from .degrade.pipeline import degrade_pipeline, resolve_spec
    from .imageio import list_ppm, read_ppm, write_dataset_dir
    from .nn import DeterministicRng

    conf = _load_json(a.config) if a.config else {"preset": "bnj"}
    scale = int(conf.get("final_scale", conf.get("scale", 4)))
    spec = resolve_spec(conf["preset"], scale) if "preset" in conf else resolve_spec(conf)
    _echo("degrade", spec.to_dict(), a.seed)
    src = os.path.join(a.inp, "hr") if os.path.isdir(os.path.join(a.inp, "hr")) else a.inp
    names = [f[:-4] for f in list_ppm(src)]
    if not names:
        raise DataError(f"no .ppm images in {src}")
    triples = []
    for i, name in enumerate(names):
        hr = read_ppm(os.path.join(src, name + ".ppm"))
        lr, rec = degrade_pipeline(hr, spec, DeterministicRng(a.seed, i, "degrade"))
        triples.append((hr, lr, rec))
    write_dataset_dir(a.out, triples, names)
    _write_run_json(a.out, "degrade", spec.to_dict(), a.seed)
    print(f"degraded {len(names)} images into {a.out}")


def cmd_train(a):
    from .checkpoint import read_checkpoint, save_checkpoint
    from .train import MetricsLog, TrainConfig, TrainingAborted, load_dataset, train_all

    conf = _load_json(a.config) if a.config else {}
    if a.seed is not None:
        conf["seed"] = a.seed
    if a.variant is not None:
        conf["variant"] = a.variant
    cfg = TrainConfig.from_dict(conf)
    _echo("train", cfg.to_dict(), cfg.seed)
    stages = (1, 2, 3) if a.stage == "all" else (int(a.stage),)
    ckpt = read_checkpoint(a.ckpt_in) if a.ckpt_in else None
    if stages[0] != 1 and ckpt is None:
        raise UsageError(f"--stage {a.stage} needs --ckpt-in")
    data = load_dataset(cfg.dataset, cfg.seed, cfg.sr.scale, np.dtype(cfg.dtype))
    metrics = MetricsLog()
    try:
        out = train_all(cfg, data, metrics, stages, ckpt)
    except TrainingAborted as exc:
        save_checkpoint(exc.checkpoint, a.ckpt_out)
        if a.log:
            metrics.write(a.log)
        print(f"training aborted at step {exc.step}; last finite checkpoint written to {a.ckpt_out}",
              file=sys.stderr)
        raise
    save_checkpoint(out[stages[-1]], a.ckpt_out)
    if a.log:
        metrics.write(a.log)
    last = metrics.records[-1] if metrics.records else None
    print(f"stages {','.join(map(str, stages))} done; {len(metrics.records)} steps"
          + (f"; final loss {last['loss']:.6g}" if last else "") + f"; checkpoint {a.ckpt_out}")


def _model_from(path, window, heads):
    from .checkpoint import checkpoint_dtype, infer_sr_config, read_checkpoint
    from .model import USRModel

    ck = read_checkpoint(path)
    over = {k: v for k, v in (("window", window), ("heads", heads)) if v is not None}
    cfg = infer_sr_config(ck, **over)
    model = USRModel(cfg, dtype=checkpoint_dtype(ck))
    ck.check_compatible(model)
    model.load_state(ck.params)
    return model


def _model_args(p):
    p.add_argument("--ckpt", required=True, help="checkpoint file (.usrc)")
    p.add_argument("--variant", default="full", choices=["full", "no-ais", "no-aude", "neither"])
    p.add_argument("--window", type=int, default=None, help="attention window (default 4)")
    p.add_argument("--heads", type=int, default=None, help="attention heads (default 2)")


def cmd_sr(a):
    from .imageio import read_ppm, write_ppm

    model = _model_from(a.ckpt, a.window, a.heads)
    _echo("sr", {"sr": model.cfg.to_dict(), "variant": a.variant, "dtype": str(model.dtype)}, None)
    lr = read_ppm(a.inp)
    write_ppm(model.super_resolve(lr, a.variant), a.out)
    print(f"wrote {a.out}")


def cmd_eval(a):
    from .eval import bicubic_report, emit_report, evaluate_model
    from .imageio import read_dataset_dir

    items = read_dataset_dir(a.dataset)
    pairs = [(hr, lr) for _, hr, lr, _ in items]
    names = [n for n, *_ in items]
    if a.bicubic:
        _echo("eval", {"method": "bicubic", "scale": a.scale}, None)
        rep = bicubic_report(pairs, a.scale, names)
    else:
        model = _model_from(a.ckpt, a.window, a.heads)
        _echo("eval", {"sr": model.cfg.to_dict(), "variant": a.variant}, None)
        rep = evaluate_model(model, pairs, a.variant, names)
    emit_report(rep, a.report, "csv")
    print(f"mean PSNR {rep.mean_psnr:.4f} dB, mean SSIM {rep.mean_ssim:.4f} over {len(names)} images")


def cmd_stability(a):
    from .eval import emit_report, stability_metric
    from .imageio import read_ppm
    from .nn import DeterministicRng

    model = _model_from(a.ckpt, a.window, a.heads)
    _echo("stability", {"patches": a.patches, "patch_size": a.patch_size, "sr": model.cfg.to_dict()}, a.seed)
    img = read_ppm(a.image)
    rep = stability_metric(model, img, a.patches, a.patch_size, DeterministicRng(a.seed, 0, "stability"),
                           os.path.splitext(os.path.basename(a.image))[0])
    emit_report(rep, a.report, "csv")
    print(f"instability {rep.instability:.6g} over {rep.dims} dimensions")


def cmd_cluster(a):
    from .eval import cluster_separability, emit_report
    from .imageio import read_dataset_dir
    from .nn import no_grad

    model = _model_from(a.ckpt, a.window, a.heads)
    _echo("cluster", {"sr": model.cfg.to_dict()}, None)
    samples = []
    with no_grad():
        for name, _, lr, rec in read_dataset_dir(a.dataset):
            if rec is None or not rec.get("mode"):
                raise DataError(f"{name} has no degradation record with a mode label")
            samples.append((model.udr(lr.astype(model.dtype)).data, rec["mode"]))
    rep = cluster_separability(samples)
    emit_report(rep, a.report, "csv")
    if a.svg:
        emit_report(rep, a.svg, "svg")
    print(f"silhouette {rep.silhouette:.4f} over {len(samples)} samples")


def cmd_gradcheck(a):
    from .gradsuite import GROUPS, TOLERANCE, run_suite

    groups = GROUPS if a.module == "all" else (a.module,)
    _echo("gradcheck", {"module": a.module, "tolerance": TOLERANCE}, None)
    rows = run_suite(groups)
    print(f"{'group':<6} {'case':<28} {'max_rel_err':>12} {'seconds':>8}  status")
    failed = 0
    for g, name, err, sec in rows:
        ok = err <= TOLERANCE
        failed += not ok
        print(f"{g:<6} {name:<28} {err:12.3e} {sec:8.2f}  {'ok' if ok else 'FAIL'}")
    if failed:
        raise NumericError(f"{failed} gradient check(s) above {TOLERANCE}")
    print(f"all {len(rows)} checks within {TOLERANCE}")


# --- parser -------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="usr", description="Blind super-resolution with uncertainty-aware degradation extraction.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("synth", help="write a procedural HR/LR dataset")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--size", type=int, required=True, help="HR side length")
    s.add_argument("--mode", default="mixed", choices=["bnj", "bn", "bj", "mixed", "realesrgan"])
    s.add_argument("--scale", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("degrade", help="degrade a directory of HR .ppm images")
    s.add_argument("--config", help="JSON pipeline spec or {\"preset\": name}")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("train", help="run training stages")
    s.add_argument("--config", help="JSON training config")
    s.add_argument("--stage", default="all", choices=["1", "2", "3", "all"])
    s.add_argument("--variant", choices=["full", "no-ais", "no-aude", "neither"])
    s.add_argument("--seed", type=int, help="overrides the config seed")
    s.add_argument("--ckpt-in")
    s.add_argument("--ckpt-out", required=True)
    s.add_argument("--log", help="metrics CSV path")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sr", help="super-resolve one .ppm image")
    _model_args(s)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sr)

    s = sub.add_parser("eval", help="PSNR/SSIM over a dataset directory")
    s.add_argument("--ckpt", help="checkpoint file (.usrc)")
    s.add_argument("--variant", default="full", choices=["full", "no-ais", "no-aude", "neither"])
    s.add_argument("--window", type=int, default=None)
    s.add_argument("--heads", type=int, default=None)
    s.add_argument("--dataset", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--bicubic", action="store_true", help="score bicubic upsampling instead of a model")
    s.add_argument("--scale", type=int, default=4, help="scale for --bicubic")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("stability", help="UDR instability across random patches of one image")
    _model_args(s)
    s.add_argument("--image", required=True)
    s.add_argument("--patches", type=int, default=16)
    s.add_argument("--patch-size", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("cluster", help="UDR separability of degradation modes")
    _model_args(s)
    s.add_argument("--dataset", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--svg")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    s.add_argument("--module", default="all", choices=["all", "nn", "aude", "vddc"])
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "eval" and not args.bicubic and not args.ckpt:
            raise UsageError("usr eval: --ckpt is required unless --bicubic is given")
        args.func(args)
        return EXIT_OK
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except USRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

if __name__ == "__main__":
    sys.exit(main())
