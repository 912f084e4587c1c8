import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2sm.divergence import divergence_with_grad
from d2sm.memory_queue import enqueue_batch, new_queue_pair, snapshot
from oracles import cond_probs, kl_sum


def tagged(ids, d=3):
    """Rows whose first coordinate is the sample id; y rows carry the negated id."""
    x = np.zeros((len(ids), d))
    x[:, 0] = ids
    return x, -x


def ids_of(rows):
    return [int(v) for v in rows[:, 0]]


def test_new_queue():
    assert len(new_queue_pair(4, 3)) == 0
    assert new_queue_pair(128, 16).capacity == 128
    with pytest.raises(ValueError):
        new_queue_pair(1, 3)


def test_fifo_example():
    qp = new_queue_pair(4, 3)
    for batch, expected in (([1, 2], [1, 2]), ([3, 4], [3, 4, 1, 2]), ([5, 6], [5, 6, 3, 4])):
        enqueue_batch(qp, *tagged(batch))
        assert ids_of(qp.entries_x) == expected


def test_full_replacement_when_batch_fills_queue():
    qp = new_queue_pair(3, 3)
    enqueue_batch(qp, *tagged([1, 2, 3]))
    enqueue_batch(qp, *tagged([4, 5, 6]))
    assert ids_of(qp.entries_x) == [4, 5, 6]


def test_paper_sized_queue():
    qp = new_queue_pair(128, 16)
    rng = np.random.default_rng(0)
    for step in range(1, 6):
        f = rng.normal(size=(32, 16))
        enqueue_batch(qp, f, f)
        assert len(qp) == min(32 * step, 128)
    _, _, live = snapshot(qp)
    assert live.sum() == 32 and len(live) == 128  # current batch + 3 historic batches


def test_errors():
    qp = new_queue_pair(4, 3)
    with pytest.raises(ValueError, match="capacity"):
        enqueue_batch(qp, np.ones((5, 3)), np.ones((5, 3)))
    with pytest.raises(ValueError, match="dimension"):
        enqueue_batch(qp, np.ones((2, 4)), np.ones((2, 4)))
    with pytest.raises(ValueError, match="mismatch"):
        enqueue_batch(qp, np.ones((2, 3)), np.ones((1, 3)))
    with pytest.raises(ValueError):
        snapshot(qp)
    enqueue_batch(qp, np.ones((1, 3)), np.ones((1, 3)))
    with pytest.raises(ValueError):
        snapshot(qp)


def test_snapshot_masks():
    qp = new_queue_pair(4, 3)
    enqueue_batch(qp, *tagged([1, 2]))
    _, _, live = snapshot(qp)
    assert live.tolist() == [True, True]
    enqueue_batch(qp, *tagged([3, 4]))
    x, y, live = snapshot(qp)
    assert live.tolist() == [True, True, False, False]
    x[0, 0] = 99  # snapshot is a copy
    assert qp.entries_x[0, 0] == 3


def test_snapshot_divergence_matches_direct(rng):
    qp = new_queue_pair(16, 4)
    stream = [(rng.normal(size=(4, 4)), rng.normal(size=(4, 4))) for _ in range(5)]
    for fx, fy in stream:
        enqueue_batch(qp, fx, fy)
    x, y, live = snapshot(qp)
    rows_x = np.concatenate([fx for fx, _ in reversed(stream[1:])])
    rows_y = np.concatenate([fy for _, fy in reversed(stream[1:])])
    expected = kl_sum(cond_probs(rows_x.tolist()), cond_probs(rows_y.tolist()))
    assert divergence_with_grad(x, y, "kl", live).value == pytest.approx(expected, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 16), st.lists(st.integers(1, 16), min_size=1, max_size=12))
def test_occupancy_and_alignment(q, sizes):
    sizes = [min(s, q) for s in sizes]
    qp = new_queue_pair(q, 3)
    reference, next_id = [], 0
    for n in sizes:
        ids = list(range(next_id, next_id + n))
        next_id += n
        enqueue_batch(qp, *tagged(ids))
        reference = (ids + reference)[:q]
        assert ids_of(qp.entries_x) == reference
        assert ids_of(-qp.entries_y) == reference
        assert qp.live_count == n
