"""Central finite differences, used to check the hand-written gradients."""

import numpy as np

from .divergence import divergence_with_grad


def numeric_grad(fn, x, h=1e-5):
    """Central-difference gradient of scalar ``fn`` at ``x`` (float64)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        fp = fn(x)
        x[idx] = orig - h
        fm = fn(x)
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * h)
    return g


def max_rel_error(analytic, numeric):
    """Largest absolute deviation relative to the largest gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def divergence_grad_check(n, d, seed, variant="kl", precision="double"):
    """Check divergence_with_grad on a seeded random instance; returns max relative error."""
    rng = np.random.default_rng(seed)
    fx = rng.normal(size=(n, d))
    fy = rng.normal(size=(n, d))
    h = 1e-5
    if precision == "single":
        fx = fx.astype(np.float32).astype(np.float64)
        fy = fy.astype(np.float32).astype(np.float64)
        h = 1e-3
    elif precision != "double":
        raise ValueError(f"precision must be 'double' or 'single', got {precision!r}")
    analytic = divergence_with_grad(fx, fy, variant).grad
    numeric = numeric_grad(lambda f: divergence_with_grad(f, fy, variant).value, fx, h)
    return max_rel_error(analytic, numeric)
