"""Sliding-window patch extraction for internal (per-image) statistics.

Windows start at multiples of the stride; trailing rows/columns that do not
fit a full window are dropped.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PatchSpec:
    size: int
    stride: int

    def __post_init__(self):
        if not 1 <= self.stride <= self.size:
            raise ValueError(f"need 1 <= stride <= size, got size={self.size} stride={self.stride}")


@dataclass(frozen=True)
class PatchGrid:
    coords: tuple  # row-major (row, col) top-left corners
    rows: int
    cols: int
    size: int
    height: int
    width: int

    def __len__(self):
        return len(self.coords)


def patch_count(height, width, size, stride):
    return ((height - size) // stride + 1) * ((width - size) // stride + 1)


def patch_grid(height, width, spec):
    k, s = spec.size, spec.stride
    if k > height or k > width:
        raise ValueError(f"window {k} does not fit a {height}x{width} image")
    r = (height - k) // s + 1
    c = (width - k) // s + 1
    coords = tuple((i * s, j * s) for i in range(r) for j in range(c))
    return PatchGrid(coords, r, c, k, height, width)


def _check(img, grid):
    if img.shape[0] != grid.height or img.shape[1] != grid.width:
        raise ValueError(f"grid built for {grid.height}x{grid.width}, image is "
                         f"{img.shape[0]}x{img.shape[1]}")


def extract_patches(img, grid):
    """Stack of (len(grid), K, K, C) exact sub-tensors, in grid order."""
    img = np.asarray(img)
    _check(img, grid)
    k = grid.size
    return np.stack([img[r:r + k, c:c + k] for r, c in grid.coords])


def accumulate_patches(patch_grads, grid, channels):
    """Adjoint of extract_patches: scatter-add patch gradients onto the image."""
    out = np.zeros((grid.height, grid.width, channels))
    k = grid.size
    for g, (r, c) in zip(patch_grads, grid.coords):
        out[r:r + k, c:c + k] += g
    return out
