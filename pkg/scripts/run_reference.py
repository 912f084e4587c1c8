"""Train the reference configuration with several objectives and compare them.

    python scripts/run_reference.py --out runs/reference --seeds 0 1 2
    python scripts/run_reference.py --variants none kl perceptual --steps 500

Prints one line per (seed, objective) and writes ``summary.csv`` under --out.
"""

import argparse
import csv
import logging
from pathlib import Path

from d2sm.experiments import REFERENCE_CONFIG, compare_objectives, reference_dataset


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/reference")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--variants", nargs="+", default=["none", "kl"])
    p.add_argument("--steps", type=int, default=REFERENCE_CONFIG.steps)
    p.add_argument("--lam", type=float, default=REFERENCE_CONFIG.lam)
    p.add_argument("--mode", choices=("batch", "patch"), default=REFERENCE_CONFIG.mode)
    p.add_argument("--use-queue", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    out = Path(args.out)
    data = reference_dataset(out / "data")
    res = compare_objectives(data, seeds=args.seeds, variants=args.variants, steps=args.steps,
                             eval_every=args.steps, lam=args.lam, mode=args.mode,
                             use_queue=args.use_queue)
    fields = ["seed", "variant", "psnr", "ssim", "feature_kl", "pixel_loss", "d2sm_loss", "seconds"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for (seed, variant), r in sorted(res.items()):
            w.writerow([seed, variant] + [r[f] for f in fields[2:]])
            print(f"seed {seed} {variant:>10}: psnr {r['psnr']:.3f}  ssim {r['ssim']:.4f}  "
                  f"feature_kl {r['feature_kl']:.6f}  ({r['seconds']:.0f}s)")


if __name__ == "__main__":
    main()
