"""Paired FIFO feature queues for estimating divergences over q >> N samples.

Rows are stored newest-first. Each enqueue puts the new batch (in batch
order) at positions 0..N-1, shifts older rows back by N and drops whatever
falls past capacity. Only detached feature values are kept.
"""

import numpy as np


class FeatureQueuePair:
    def __init__(self, capacity, dim):
        if capacity < 2:
            raise ValueError("queue capacity must be at least 2")
        if dim < 1:
            raise ValueError("feature dimension must be positive")
        self.capacity = capacity
        self.dim = dim
        self.entries_x = np.empty((0, dim))
        self.entries_y = np.empty((0, dim))
        self.live_count = 0

    def __len__(self):
        return self.entries_x.shape[0]

    def enqueue(self, fx, fy):
        fx = np.array(fx, dtype=np.float64, ndmin=2)
        fy = np.array(fy, dtype=np.float64, ndmin=2)
        if fx.shape != fy.shape:
            raise ValueError(f"restored/clear batch mismatch: {fx.shape} vs {fy.shape}")
        n, d = fx.shape
        if d != self.dim:
            raise ValueError(f"feature dimension {d} != queue dimension {self.dim}")
        if n > self.capacity:
            raise ValueError(f"batch of {n} exceeds queue capacity {self.capacity}")
        self.entries_x = np.concatenate([fx, self.entries_x])[:self.capacity]
        self.entries_y = np.concatenate([fy, self.entries_y])[:self.capacity]
        self.live_count = n
        return self

    def snapshot(self):
        """Return copies (fx_all, fy_all, live) with the newest batch marked live."""
        if len(self) < 2:
            raise ValueError(f"queue holds {len(self)} rows; need at least 2")
        live = np.zeros(len(self), dtype=bool)
        live[:self.live_count] = True
        return self.entries_x.copy(), self.entries_y.copy(), live


def new_queue_pair(q, d):
    return FeatureQueuePair(q, d)


def enqueue_batch(qp, fx, fy):
    return qp.enqueue(fx, fy)


def snapshot(qp):
    return qp.snapshot()
