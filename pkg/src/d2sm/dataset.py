"""Synthetic texture-grid denoising dataset and its manifest.

Every clean image is a 2x2 grid of regions; each region is a sinusoidal
grating from one of ``classes`` texture classes (orientation m*pi/M, a
per-class frequency, random phase). Noisy images add i.i.d. Gaussian noise
without clipping.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorio import read_tensor, write_tensor

MANIFEST_NAME = "manifest.txt"


@dataclass
class DatasetManifest:
    count: int
    holdout: int
    height: int
    width: int
    channels: int
    classes: int
    sigma: float
    seed: int
    # (split, clean relpath, noisy relpath), train items first
    items: list = field(default_factory=list)
    root: Path = None

    def split(self, name):
        return [(c, n) for s, c, n in self.items if s == name]

    def load(self, name):
        """Return (clean, noisy) float32 arrays of shape (n, H, W, C)."""
        pairs = self.split(name)
        if not pairs:
            raise ValueError(f"split {name!r} is empty")
        clean = np.stack([read_tensor(self.root / c) for c, _ in pairs])
        noisy = np.stack([read_tensor(self.root / n) for _, n in pairs])
        return clean, noisy


def texture(cls, classes, height, width, phase=0.0):
    """Grating for texture class ``cls`` in [0, 1], float64 (H, W)."""
    theta = cls * math.pi / classes
    freq = 1.0 / (3.0 + 2.0 * cls)  # cycles per pixel
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    proj = xx * math.cos(theta) + yy * math.sin(theta)
    return 0.5 + 0.5 * np.sin(2.0 * math.pi * freq * proj + phase)


def make_pair(index, height, width, channels, classes, sigma, seed):
    """Deterministic (clean, noisy) float32 pair for item ``index``."""
    rng = np.random.default_rng([seed, index])
    clean = np.empty((height, width, channels), dtype=np.float64)
    hs, ws = height // 2, width // 2
    for r0, r1 in ((0, hs), (hs, height)):
        for c0, c1 in ((0, ws), (ws, width)):
            cls = int(rng.integers(classes))
            phase = float(rng.uniform(0.0, 2.0 * math.pi))
            tex = texture(cls, classes, r1 - r0, c1 - c0, phase)
            for ch in range(channels):
                clean[r0:r1, c0:c1, ch] = tex
    clean = clean.astype(np.float32)
    noise = rng.normal(0.0, sigma, size=clean.shape) if sigma > 0 else 0.0
    noisy = (clean.astype(np.float64) + noise).astype(np.float32)
    return clean, noisy


def generate_dataset(count, size, classes, sigma, seed, out, holdout=0):
    """Write ``count`` training pairs plus ``holdout`` test pairs under ``out``."""
    height, width, channels = size
    if count < 1 or holdout < 0:
        raise ValueError("count must be >= 1 and holdout >= 0")
    if height < 8 or width < 8 or channels < 1:
        raise ValueError(f"invalid image size {size}")
    if classes < 2:
        raise ValueError("need at least 2 texture classes")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    out = Path(out)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    (out / "noisy").mkdir(parents=True, exist_ok=True)
    items = []
    for i in range(count + holdout):
        clean, noisy = make_pair(i, height, width, channels, classes, sigma, seed)
        c_rel, n_rel = f"clean/{i:05d}.d2t", f"noisy/{i:05d}.d2t"
        write_tensor(clean, out / c_rel)
        write_tensor(noisy, out / n_rel)
        items.append(("train" if i < count else "test", c_rel, n_rel))
    manifest = DatasetManifest(count, holdout, height, width, channels, classes,
                               float(sigma), seed, items, out)
    write_manifest(manifest, out / MANIFEST_NAME)
    return manifest


def write_manifest(m, path):
    lines = [
        "format = d2sm-dataset",
        "version = 1",
        f"count = {m.count}",
        f"holdout = {m.holdout}",
        f"height = {m.height}",
        f"width = {m.width}",
        f"channels = {m.channels}",
        f"classes = {m.classes}",
        f"sigma = {m.sigma!r}",
        f"seed = {m.seed}",
        "",
        "[files]",
    ]
    lines += [f"{s} {c} {n}" for s, c, n in m.items]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    """Parse a manifest; ``path`` may be the file or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    kv, items, in_files = {}, [], False
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[files]":
            in_files = True
        elif in_files:
            split, clean, noisy = line.split()
            items.append((split, clean, noisy))
        else:
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    if kv.get("format") != "d2sm-dataset":
        raise ValueError(f"{path}: not a dataset manifest")
    m = DatasetManifest(
        count=int(kv["count"]), holdout=int(kv["holdout"]), height=int(kv["height"]),
        width=int(kv["width"]), channels=int(kv["channels"]), classes=int(kv["classes"]),
        sigma=float(kv["sigma"]), seed=int(kv["seed"]), items=items, root=path.parent)
    if len(items) != m.count + m.holdout:
        raise ValueError(f"{path}: lists {len(items)} items, expected {m.count + m.holdout}")
    return m
