"""Cosine-kernel similarities and kernel-density neighbour probabilities.

Convention: ``P[i, j]`` is the probability that anchor ``j`` picks neighbour
``i``; columns are normalised over ``k != j`` and the diagonal is zero.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)

KERNEL_FLOOR = 1e-12
ZERO_NORM_KERNEL = 0.5


def cosine_kernel(a, b):
    """Half-shifted cosine similarity in [0, 1].

    A zero-norm argument yields 0.5 (uninformative) instead of an error.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        logger.debug("zero-norm vector in cosine_kernel; using %s", ZERO_NORM_KERNEL)
        return ZERO_NORM_KERNEL
    cos = float(a @ b) / (na * nb)
    return float(np.clip(0.5 * (cos + 1.0), 0.0, 1.0))


def _unit_rows(f):
    f = np.asarray(f, dtype=np.float64)
    norms = np.linalg.norm(f, axis=1)
    zero = norms == 0.0
    u = np.zeros_like(f)
    u[~zero] = f[~zero] / norms[~zero, None]
    return u, norms, zero


def _kernel_from_units(u, zero):
    c = u @ u.T
    k = np.triu(0.5 * (c + 1.0))
    k = k + np.triu(k, 1).T  # mirror the upper triangle: exact symmetry
    np.clip(k, 0.0, 1.0, out=k)
    if zero.any():
        logger.debug("%d zero-norm feature rows; kernel set to %s", int(zero.sum()), ZERO_NORM_KERNEL)
        k[zero, :] = ZERO_NORM_KERNEL
        k[:, zero] = ZERO_NORM_KERNEL
    return k


def kernel_matrix(features):
    """n x n matrix of pairwise cosine kernels between feature rows."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError(f"need an (n, d) batch with n >= 2, got shape {f.shape}")
    u, _, zero = _unit_rows(f)
    return _kernel_from_units(u, zero)


def cond_prob_matrix(kernel):
    """Column-normalised neighbour probabilities g_{i|j} from a kernel matrix."""
    k = np.array(kernel, dtype=np.float64)
    n = k.shape[0]
    if k.ndim != 2 or k.shape[1] != n or n < 2:
        raise ValueError(f"need a square kernel matrix with n >= 2, got shape {k.shape}")
    k = np.maximum(k, KERNEL_FLOOR)
    np.fill_diagonal(k, 0.0)
    return k / k.sum(axis=0, keepdims=True)


def cond_prob_from_features(features):
    return cond_prob_matrix(kernel_matrix(features))
