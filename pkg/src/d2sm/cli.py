"""Command-line entry point: ``d2sm <subcommand> ...``.

JSON results go to stdout, bulk artifacts to ``--out`` paths. Validation
failures exit with status 1 and a single ``error: ...`` line on stderr;
usage errors exit with status 2.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import generate_dataset, read_manifest
from .divergence import VARIANTS, divergence_with_grad
from .extractor import extract_features, init_extractor
from .gradcheck import divergence_grad_check
from .patches import PatchSpec, extract_patches, patch_grid
from .tensorio import TensorFormatError, read_tensor, write_tensor
from .train import LOSS_VARIANTS, TrainConfig, evaluate, load_checkpoint, load_config, train

GRAD_TOL = {"double": 1e-5, "single": 1e-3}


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def _emit(obj):
    print(json.dumps(_json_value(obj), sort_keys=True))


def cmd_gen_data(args):
    m = generate_dataset(args.count, (args.height, args.width, args.channels), args.classes,
                         args.sigma, args.seed, args.out, holdout=args.holdout)
    _emit({"out": str(args.out), "count": m.count, "holdout": m.holdout})
    return 0


def cmd_extract(args):
    m = read_manifest(args.manifest)
    ext = init_extractor(args.seed, m.channels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts = {}
    for split in ("train", "test"):
        if not m.split(split):
            continue
        clean, noisy = m.load(split)
        write_tensor(extract_features(ext, clean).astype(np.float32), out / f"{split}_clean.d2t")
        write_tensor(extract_features(ext, noisy).astype(np.float32), out / f"{split}_noisy.d2t")
        counts[split] = int(clean.shape[0])
    _emit({"out": str(out), "splits": counts})
    return 0


def _features_for(path, ext_seed, spec):
    """Features from a tensor file: rank 2 is used as-is, rank 3/4 are images.

    Returns a list of feature batches (one per image in patch mode).
    """
    t = read_tensor(path)
    if t.ndim == 2:
        if spec is not None:
            raise ValueError(f"{path}: patch flags need image inputs, got a feature file")
        return [t.astype(np.float64)]
    if t.ndim == 3:
        t = t[None]
    if t.ndim != 4:
        raise ValueError(f"{path}: unsupported tensor rank {t.ndim}")
    ext = init_extractor(ext_seed, t.shape[-1])
    if spec is None:
        return [extract_features(ext, t)]
    grid = patch_grid(t.shape[1], t.shape[2], spec)
    return [extract_features(ext, extract_patches(img, grid)) for img in t]


def cmd_divergence(args):
    spec = None
    if args.patch_size is not None or args.stride is not None:
        if args.patch_size is None:
            raise ValueError("--stride needs --patch-size")
        spec = PatchSpec(args.patch_size, args.stride or args.patch_size)
    fa = _features_for(args.a, args.seed, spec)
    fb = _features_for(args.b, args.seed, spec)
    if len(fa) != len(fb):
        raise ValueError(f"inputs hold {len(fa)} and {len(fb)} images")
    values = [divergence_with_grad(x, y, args.variant).value for x, y in zip(fa, fb)]
    _emit({"variant": args.variant, "n": int(fa[0].shape[0]), "value": float(np.mean(values))})
    return 0


def cmd_grad_check(args):
    err = divergence_grad_check(args.n, args.d, args.seed, args.variant, args.precision)
    tol = GRAD_TOL[args.precision]
    _emit({"variant": args.variant, "n": args.n, "d": args.d, "precision": args.precision,
           "max_rel_err": err, "tol": tol, "ok": err <= tol})
    return 0 if err <= tol else 1


_TRAIN_OVERRIDES = {
    "dataset": "dataset", "epochs": "epochs", "steps": "steps", "batch_size": "batch_size",
    "lr": "lr", "w_pixel": "w_pixel", "lam": "lam", "variant": "variant", "mode": "mode",
    "patch_size": "patch_size", "stride": "stride", "queue_size": "queue_size",
    "use_queue": "use_queue", "seed_data": "seed_data", "seed_model": "seed_model",
    "seed_extractor": "seed_extractor", "eval_every": "eval_every", "out": "out_dir",
}


def cmd_train(args):
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {field: getattr(args, flag) for flag, field in _TRAIN_OVERRIDES.items()
                 if getattr(args, flag) is not None}
    cfg = replace(cfg, **overrides)
    if not cfg.dataset:
        raise ValueError("no dataset given (config key 'dataset' or --dataset)")
    _, rows = train(cfg)
    last = rows[-1] if rows else None
    _emit({"out_dir": cfg.out_dir, "records": len(rows),
           "final": None if last is None else dict(zip(
               ("step", "pixel_loss", "d2sm_loss", "total_loss", "psnr", "ssim", "feature_kl"),
               last))})
    return 0


def cmd_eval(args):
    params, info = load_checkpoint(args.checkpoint)
    m = read_manifest(args.dataset)
    clean, noisy = m.load(args.split)
    mode = args.mode or info.get("mode", "patch")
    k = args.patch_size or int(info.get("patch_size", 16))
    s = args.stride or int(info.get("stride", 8))
    seed = args.seed_extractor if args.seed_extractor is not None else int(info.get("seed_extractor", 0))
    ext = init_extractor(seed, clean.shape[-1])
    rec = evaluate(params, noisy, clean, ext, mode, PatchSpec(k, s))
    rec.update({"split": args.split, "mode": mode, "step": int(info.get("step", 0))})
    _emit(rec)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="d2sm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate the synthetic texture dataset")
    g.add_argument("--count", type=int, default=256, help="training pairs")
    g.add_argument("--holdout", type=int, default=32, help="held-out test pairs")
    g.add_argument("--height", type=int, default=32)
    g.add_argument("--width", type=int, default=32)
    g.add_argument("--channels", type=int, default=1)
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--sigma", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_data)

    e = sub.add_parser("extract", help="write whole-image features for each split")
    e.add_argument("--manifest", required=True, help="dataset directory or manifest file")
    e.add_argument("--seed", type=int, default=0, help="extractor seed")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_extract)

    d = sub.add_parser("divergence", help="divergence between two feature or image files")
    d.add_argument("--a", required=True, help="restored-side tensor file")
    d.add_argument("--b", required=True, help="clear-side tensor file")
    d.add_argument("--variant", choices=VARIANTS, default="kl")
    d.add_argument("--patch-size", type=int)
    d.add_argument("--stride", type=int)
    d.add_argument("--seed", type=int, default=0, help="extractor seed for image inputs")
    d.set_defaults(fn=cmd_divergence)

    c = sub.add_parser("grad-check", help="finite-difference check of the divergence gradient")
    c.add_argument("--n", type=int, default=6)
    c.add_argument("--d", type=int, default=8)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--variant", choices=VARIANTS, default="kl")
    c.add_argument("--precision", choices=tuple(GRAD_TOL), default="double")
    c.set_defaults(fn=cmd_grad_check)

    t = sub.add_parser("train", help="train the denoiser")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--dataset")
    t.add_argument("--epochs", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--w-pixel", type=float)
    t.add_argument("--lambda", dest="lam", type=float)
    t.add_argument("--variant", choices=LOSS_VARIANTS)
    t.add_argument("--mode", choices=("batch", "patch"))
    t.add_argument("--patch-size", type=int)
    t.add_argument("--stride", type=int)
    t.add_argument("--queue-size", type=int)
    t.add_argument("--use-queue", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--seed-data", type=int)
    t.add_argument("--seed-model", type=int)
    t.add_argument("--seed-extractor", type=int)
    t.add_argument("--eval-every", type=int)
    t.add_argument("--out")
    t.set_defaults(fn=cmd_train)

    v = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--dataset", required=True)
    v.add_argument("--split", default="test")
    v.add_argument("--mode", choices=("batch", "patch"))
    v.add_argument("--patch-size", type=int)
    v.add_argument("--stride", type=int)
    v.add_argument("--seed-extractor", type=int)
    v.set_defaults(fn=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError, TensorFormatError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
