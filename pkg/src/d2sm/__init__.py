"""Semantic statistics matching for image restoration.

Kernel-density neighbour distributions over feature batches, divergence
matching with analytic gradients, historic feature queues, patch-wise
internal statistics, and a small numpy denoising harness.
"""

from .divergence import DivergenceResult, divergence_with_grad, kl_divergence, perceptual_mse
from .kernel_density import cond_prob_matrix, cosine_kernel, kernel_matrix
from .memory_queue import FeatureQueuePair, enqueue_batch, new_queue_pair, snapshot
from .patches import PatchGrid, PatchSpec, extract_patches, patch_grid
from .tensorio import read_tensor, write_tensor

__all__ = [
    "DivergenceResult", "divergence_with_grad", "kl_divergence", "perceptual_mse",
    "cond_prob_matrix", "cosine_kernel", "kernel_matrix",
    "FeatureQueuePair", "enqueue_batch", "new_queue_pair", "snapshot",
    "PatchGrid", "PatchSpec", "extract_patches", "patch_grid",
    "read_tensor", "write_tensor",
]
