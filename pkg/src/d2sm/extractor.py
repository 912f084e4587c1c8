"""Frozen, seeded two-layer conv network used as the semantic feature map.

Pipeline per image: conv3x3 (C->8) -> tanh -> 2x2 avg pool -> conv3x3 (8->16)
-> tanh -> global average pool, giving a 16-dim feature. No biases.

Features are reported relative to the response to a flat mid-gray field of
the same size, so a featureless image maps to the zero vector. Without this
reference every image shares a large common response and all cosine
similarities sit near 1.
"""

from dataclasses import dataclass

import numpy as np

from .conv import avg_pool2, avg_pool2_backward, conv3x3, conv3x3_backward

FEATURE_DIM = 16
HIDDEN = 8
REFERENCE_LEVEL = 0.5


@dataclass(frozen=True)
class ExtractorWeights:
    conv1: np.ndarray  # (3, 3, C, 8)
    conv2: np.ndarray  # (3, 3, 8, 16)
    seed: int

    @property
    def channels(self):
        return self.conv1.shape[2]


def init_extractor(seed, channels=1):
    """N(0, 1/fan_in) weights from ``numpy.random.default_rng(seed)``, stored float32."""
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, np.sqrt(1.0 / (9 * channels)), size=(3, 3, channels, HIDDEN))
    w2 = rng.normal(0.0, np.sqrt(1.0 / (9 * HIDDEN)), size=(3, 3, HIDDEN, FEATURE_DIM))
    w1 = w1.astype(np.float32)
    w2 = w2.astype(np.float32)
    w1.flags.writeable = False
    w2.flags.writeable = False
    return ExtractorWeights(w1, w2, seed)


def _as_batch(w, batch):
    x = np.asarray(batch if not isinstance(batch, (list, tuple)) else np.stack(batch),
                   dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise ValueError(f"expected a batch of (H, W, C) images, got shape {x.shape}")
    if x.shape[-1] != w.channels:
        raise ValueError(f"image has {x.shape[-1]} channels, extractor expects {w.channels}")
    if x.shape[1] < 4 or x.shape[2] < 4:
        raise ValueError(f"image {x.shape[1]}x{x.shape[2]} smaller than 4x4")
    return x


def _forward(w, x):
    z1, cols1 = conv3x3(x, w.conv1.astype(np.float64))
    a1 = np.tanh(z1)
    p1 = avg_pool2(a1)
    z2, cols2 = conv3x3(p1, w.conv2.astype(np.float64))
    a2 = np.tanh(z2)
    feats = a2.mean(axis=(1, 2))
    return feats, (a1, cols1, p1, a2, cols2)


def reference_response(w, height, width):
    """Raw network response to a constant REFERENCE_LEVEL image."""
    flat = np.full((1, height, width, w.channels), REFERENCE_LEVEL)
    return _forward(w, flat)[0][0]


def extract_features(w, batch):
    """Map n images to an (n, 16) float64 feature matrix."""
    x = _as_batch(w, batch)
    feats, _ = _forward(w, x)
    return feats - reference_response(w, x.shape[1], x.shape[2])


def extract_backward(w, batch, dl_df):
    """Image gradients (n, H, W, C) for upstream feature gradients ``dl_df``."""
    x = _as_batch(w, batch)
    feats, (a1, cols1, p1, a2, cols2) = _forward(w, x)
    dl_df = np.asarray(dl_df, dtype=np.float64)
    if dl_df.shape != feats.shape:
        raise ValueError(f"gradient shape {dl_df.shape} does not match features {feats.shape}")
    hp, wp = a2.shape[1], a2.shape[2]
    da2 = np.broadcast_to(dl_df[:, None, None, :] / (hp * wp), a2.shape)
    dz2 = da2 * (1.0 - a2 * a2)
    _, _, dp1 = conv3x3_backward(dz2, cols2, w.conv2.astype(np.float64))
    da1 = avg_pool2_backward(dp1, a1.shape)
    dz1 = da1 * (1.0 - a1 * a1)
    _, _, dx = conv3x3_backward(dz1, cols1, w.conv1.astype(np.float64))
    return dx
