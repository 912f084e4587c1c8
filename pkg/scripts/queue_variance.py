"""Spread of the queue-based divergence estimate as a function of queue size.

    python scripts/queue_variance.py --sizes 8 16 32 64 128
"""

import argparse

import numpy as np

from d2sm.experiments import queue_kl_estimates, synthetic_feature_stream


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=("kl", "ikl", "js"), default="kl")
    args = p.parse_args()

    stream = synthetic_feature_stream(args.steps, args.batch, seed=args.seed)
    print("queue_size,mean,std")
    for q in args.sizes:
        est = queue_kl_estimates(stream, q, args.variant)
        print(f"{q},{np.mean(est):.6g},{np.std(est):.6g}")


if __name__ == "__main__":
    main()
