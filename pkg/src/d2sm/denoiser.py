"""Residual three-layer conv denoiser with hand-written backprop, L1 loss and Adam."""

from dataclasses import dataclass, field

import numpy as np

from .conv import conv3x3, conv3x3_backward

HIDDEN = 16
PARAM_NAMES = ("conv1", "bias1", "conv2", "bias2", "conv3", "bias3")


def init_denoiser(seed, channels=1, zero=False):
    """Dict of float32 parameters; kernels N(0, 1/fan_in), biases zero.

    ``zero=True`` gives an all-zero network, i.e. the identity denoiser.
    """
    rng = np.random.default_rng(seed)
    shapes = {
        "conv1": (3, 3, channels, HIDDEN),
        "conv2": (3, 3, HIDDEN, HIDDEN),
        "conv3": (3, 3, HIDDEN, channels),
    }
    w = {}
    for i, (name, shape) in enumerate(shapes.items(), start=1):
        fan_in = 9 * shape[2]
        k = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape)
        w[name] = np.zeros(shape, np.float32) if zero else k.astype(np.float32)
        w[f"bias{i}"] = np.zeros(shape[3], np.float32)
    return w


def denoise_forward(w, noisy):
    """Return (denoised, cache); denoised = noisy - predicted noise."""
    x = np.asarray(noisy, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.shape[-1] != w["conv1"].shape[2]:
        raise ValueError(f"input has {x.shape[-1]} channels, denoiser expects {w['conv1'].shape[2]}")
    k = {name: w[name].astype(np.float64) for name in PARAM_NAMES}
    z1, cols1 = conv3x3(x, k["conv1"], k["bias1"])
    a1 = np.tanh(z1)
    z2, cols2 = conv3x3(a1, k["conv2"], k["bias2"])
    a2 = np.tanh(z2)
    z3, cols3 = conv3x3(a2, k["conv3"], k["bias3"])
    cache = {"k": k, "a1": a1, "a2": a2, "cols": (cols1, cols2, cols3), "shape": x.shape}
    return x - z3, cache


def denoise_backward(cache, d_out):
    """Parameter gradients (float64 dict) for upstream gradient ``d_out``."""
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != cache["shape"]:
        raise ValueError(f"gradient shape {d_out.shape} does not match forward {cache['shape']}")
    k, a1, a2 = cache["k"], cache["a1"], cache["a2"]
    cols1, cols2, cols3 = cache["cols"]
    g = {}
    g["conv3"], g["bias3"], da2 = conv3x3_backward(-d_out, cols3, k["conv3"])
    dz2 = da2 * (1.0 - a2 * a2)
    g["conv2"], g["bias2"], da1 = conv3x3_backward(dz2, cols2, k["conv2"])
    dz1 = da1 * (1.0 - a1 * a1)
    g["conv1"], g["bias1"], _ = conv3x3_backward(dz1, cols1, k["conv1"], need_input_grad=False)
    return g


def l1_loss(pred, target):
    """Mean absolute error and its subgradient (sign(0) = 0)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update; returns (new float32 params, new state)."""
    if set(params) != set(grads):
        raise ValueError("parameter and gradient names differ")
    t = state.step + 1
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.beta1 * state.m.get(name, 0.0) + (1.0 - state.beta1) * g
        v = state.beta2 * state.v.get(name, 0.0) + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        upd = p.astype(np.float64) - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_params[name] = upd.astype(p.dtype)
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(state.beta1, state.beta2, state.eps, t, m_new, v_new)
