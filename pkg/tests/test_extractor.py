import numpy as np
import pytest

from d2sm.extractor import extract_backward, extract_features, init_extractor
from d2sm.gradcheck import max_rel_error, numeric_grad
from oracles import extractor_naive


def test_seed_determinism():
    a, b, c = init_extractor(1), init_extractor(1), init_extractor(2)
    assert a.conv1.tobytes() == b.conv1.tobytes() and a.conv2.tobytes() == b.conv2.tobytes()
    assert a.conv1.tobytes() != c.conv1.tobytes()


def test_weight_variance():
    w = init_extractor(3)
    assert w.conv2.var() == pytest.approx(1.0 / 72, rel=0.2)
    assert w.conv2.shape == (3, 3, 8, 16)


def test_weights_frozen():
    w = init_extractor(0)
    with pytest.raises(ValueError):
        w.conv1[0, 0, 0, 0] = 1.0


def test_shape_and_zero_input(rng):
    w = init_extractor(0)
    f = extract_features(w, rng.random((5, 12, 12, 1)))
    assert f.shape == (5, 16)
    z1 = extract_features(w, np.zeros((1, 8, 8, 1)))
    z2 = extract_features(w, [np.zeros((8, 8, 1))])
    assert z1.tobytes() == z2.tobytes()


def test_flat_reference_image_maps_to_zero():
    w = init_extractor(0)
    assert np.all(extract_features(w, np.full((1, 8, 8, 1), 0.5)) == 0.0)


def test_matches_naive(rng):
    w = init_extractor(4)
    img = rng.random((8, 8, 1))
    ref = extractor_naive(img, w.conv1.astype(np.float64), w.conv2.astype(np.float64))
    np.testing.assert_allclose(extract_features(w, img[None])[0], ref, rtol=1e-5, atol=1e-12)


def test_batch_order_equivariance(rng):
    w = init_extractor(0)
    x = rng.random((6, 8, 8, 1))
    perm = rng.permutation(6)
    np.testing.assert_array_equal(extract_features(w, x)[perm], extract_features(w, x[perm]))


def test_errors():
    w = init_extractor(0, channels=1)
    with pytest.raises(ValueError, match="channels"):
        extract_features(w, np.zeros((1, 8, 8, 3)))
    with pytest.raises(ValueError, match="4x4"):
        extract_features(w, np.zeros((1, 3, 8, 1)))
    with pytest.raises(ValueError, match="shape"):
        extract_backward(w, np.zeros((2, 8, 8, 1)), np.zeros((3, 16)))


def test_backward_linearity(rng):
    w = init_extractor(0)
    x = rng.random((2, 8, 8, 1))
    g = rng.normal(size=(2, 16))
    assert np.all(extract_backward(w, x, np.zeros((2, 16))) == 0.0)
    np.testing.assert_array_equal(extract_backward(w, x, 2 * g), 2 * extract_backward(w, x, g))


@pytest.mark.parametrize("seed", range(10))
def test_backward_finite_differences(seed):
    rng = np.random.default_rng(seed)
    w = init_extractor(seed)
    x = rng.random((1, 6, 6, 1))
    g = rng.normal(size=(1, 16))
    analytic = extract_backward(w, x, g)
    numeric = numeric_grad(lambda im: float(np.sum(extract_features(w, im) * g)), x, h=1e-4)
    assert max_rel_error(analytic, numeric) <= 1e-5
