"""Desk-scale experiments shared by ``scripts/`` and the acceptance tests."""

import time
from dataclasses import replace

import numpy as np

from .dataset import generate_dataset
from .divergence import divergence_with_grad
from .memory_queue import FeatureQueuePair
from .train import TrainConfig, train

# 256 train / 32 held-out 32x32x1 images, 4 texture classes, sigma 0.1
REFERENCE_DATA = dict(count=256, holdout=32, size=(32, 32, 1), classes=4, sigma=0.1, seed=7)
REFERENCE_CONFIG = TrainConfig(steps=2000, batch_size=8, lr=1e-3, w_pixel=1.0, lam=0.1,
                               variant="kl", mode="patch", patch_size=16, stride=8,
                               eval_every=2000)


def reference_dataset(root):
    d = REFERENCE_DATA
    m = generate_dataset(d["count"], d["size"], d["classes"], d["sigma"], d["seed"], root,
                         holdout=d["holdout"])
    return (*m.load("train"), *m.load("test"))


def compare_objectives(data, seeds=(0, 1, 2), variants=("none", "kl"), base=REFERENCE_CONFIG,
                       **overrides):
    """Train one run per (seed, variant); returns {(seed, variant): final record dict}."""
    results = {}
    for seed in seeds:
        for variant in variants:
            cfg = replace(base, variant=variant, seed_data=seed, seed_model=seed,
                          seed_extractor=seed, **overrides)
            t0 = time.perf_counter()
            _, rows = train(cfg, data)
            step, pix, d2, tot, p, s, fkl = rows[-1]
            results[seed, variant] = dict(step=step, pixel_loss=pix, d2sm_loss=d2, psnr=p,
                                          ssim=s, feature_kl=fkl,
                                          seconds=time.perf_counter() - t0)
    return results


def synthetic_feature_stream(steps=200, batch=8, dim=16, clusters=4, seed=0):
    """Paired (restored, clear) feature batches: clustered clear rows plus perturbation."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(clusters, dim))
    stream = []
    for _ in range(steps):
        labels = rng.integers(clusters, size=batch)
        fy = centers[labels] + 0.5 * rng.normal(size=(batch, dim))
        fx = fy + 0.3 * rng.normal(size=(batch, dim))
        stream.append((fx, fy))
    return stream


def queue_kl_estimates(stream, capacity, variant="kl"):
    """Per-step divergence estimate over the queue snapshot, normalised per anchor.

    The raw objective sums over all ordered pairs and so grows with the number
    of rows; dividing by the row count gives the sample-average estimate that
    is comparable across queue sizes.
    """
    dim = stream[0][0].shape[1]
    qp = FeatureQueuePair(capacity, dim)
    out = []
    for fx, fy in stream:
        qp.enqueue(fx, fy)
        x, y, live = qp.snapshot()
        out.append(divergence_with_grad(x, y, variant, live).value / len(x))
    return np.array(out)
