"""Divergences between restored-side and clear-side neighbour distributions.

``kl`` is the matching objective: sum over ordered pairs of
g'_{j|i} log(g'_{j|i} / g_{j|i}), where g' comes from the restored features
and g from the clear features. ``ikl`` swaps the arguments and ``js`` is the
average of the two. Gradients are taken w.r.t. the restored features only.
"""

from dataclasses import dataclass

import numpy as np

from .kernel_density import (KERNEL_FLOOR, _kernel_from_units, _unit_rows,
                             cond_prob_from_features)

PROB_FLOOR = 1e-12
VARIANTS = ("kl", "ikl", "js")


@dataclass
class DivergenceResult:
    value: float
    grad: np.ndarray
    variant: str


def _offdiag(n):
    return ~np.eye(n, dtype=bool)


def kl_divergence(px, py):
    """Sum over off-diagonal entries of px * log(px / py), both floored at 1e-12."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    if px.shape != py.shape:
        raise ValueError(f"size mismatch: {px.shape} vs {py.shape}")
    mask = _offdiag(px.shape[0])
    a = np.maximum(px[mask], PROB_FLOOR)
    b = np.maximum(py[mask], PROB_FLOOR)
    return float(np.sum(a * np.log(a / b)))


def divergence_value(px, py, variant="kl"):
    if variant == "kl":
        return kl_divergence(px, py)
    if variant == "ikl":
        return kl_divergence(py, px)
    if variant == "js":
        return 0.5 * kl_divergence(px, py) + 0.5 * kl_divergence(py, px)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _dvalue_dpx(px, py, variant):
    a = np.maximum(px, PROB_FLOOR)
    b = np.maximum(py, PROB_FLOOR)
    live = px > PROB_FLOOR  # derivative of the floor is zero where it binds
    d_kl = np.where(live, np.log(a / b) + 1.0, 0.0)
    d_ikl = np.where(live, -b / a, 0.0)
    if variant == "kl":
        g = d_kl
    elif variant == "ikl":
        g = d_ikl
    else:
        g = 0.5 * (d_kl + d_ikl)
    np.fill_diagonal(g, 0.0)
    return g


def divergence_with_grad(fx, fy, variant="kl", live=None):
    """Divergence between the neighbour distributions of ``fx`` and ``fy``.

    Parameters
    ----------
    fx : (n, d) array
        Restored-side features; the gradient is taken w.r.t. these.
    fy : (n, d') array
        Clear-side features, treated as constants.
    variant : {"kl", "ikl", "js"}
    live : (n,) bool array, optional
        Rows of ``fx`` that carry gradient. Non-live rows still enter the
        estimate but get an exactly zero gradient. Defaults to all rows.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    n = fx.shape[0]
    if fx.ndim != 2 or fy.ndim != 2 or fy.shape[0] != n:
        raise ValueError(f"size mismatch: {fx.shape} vs {fy.shape}")
    if n < 2:
        raise ValueError("need at least 2 samples")
    live = np.ones(n, dtype=bool) if live is None else np.asarray(live, dtype=bool)
    if live.shape != (n,):
        raise ValueError(f"live mask has shape {live.shape}, expected ({n},)")
    if not live.any():
        raise ValueError("live mask is empty")

    u, norms, zero = _unit_rows(fx)
    k = _kernel_from_units(u, zero)
    kf = np.maximum(k, KERNEL_FLOOR)
    np.fill_diagonal(kf, 0.0)
    s = kf.sum(axis=0)
    px = kf / s
    py = cond_prob_from_features(fy)
    value = divergence_value(px, py, variant)

    # px[i, j] = kf[i, j] / s[j]  ->  d/dkf[i, j] = (G[i, j] - sum_i' G[i', j] px[i', j]) / s[j]
    g = _dvalue_dpx(px, py, variant)
    a = (g - np.sum(g * px, axis=0, keepdims=True)) / s
    np.fill_diagonal(a, 0.0)
    # kernel (i, j) and (j, i) are one value, 0.5 * (cos + 1)
    b = 0.5 * (a + a.T) * (k > KERNEL_FLOOR)
    b[zero, :] = 0.0
    b[:, zero] = 0.0
    np.fill_diagonal(b, 0.0)
    du = b @ u
    # through u = f / |f|
    safe = np.where(zero, 1.0, norms)
    radial = np.sum(du * u, axis=1, keepdims=True)
    grad = (du - radial * u) / safe[:, None]
    grad[zero | ~live] = 0.0
    return DivergenceResult(value, grad, variant)


def perceptual_mse(fx, fy):
    """Mean squared feature error and its gradient w.r.t. ``fx``."""
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    if fx.shape != fy.shape:
        raise ValueError(f"shape mismatch: {fx.shape} vs {fy.shape}")
    diff = fx - fy
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size
