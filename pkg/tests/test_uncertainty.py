import numpy as np
import pytest

from alseg.uncertainty import McConfig, VarianceAccumulator, mc_predict


def naive_variance(stack):
    """Two-pass oracle: population variance of the raw stack."""
    arr = np.asarray(stack, dtype=np.float64)
    mu = arr.sum(axis=0) / len(arr)
    return ((arr - mu) ** 2).sum(axis=0) / len(arr)


class ConstantPredictor:
    def __init__(self, value):
        self.value = value

    def predict_passes(self, img, t_steps, dropout_p, rng):
        return [np.full(np.asarray(img).shape, self.value) for _ in range(t_steps)]


def test_finalize_before_two_updates_is_an_error():
    acc = VarianceAccumulator(2, 2)
    with pytest.raises(RuntimeError):
        acc.finalize()
    acc.update(np.zeros((2, 2)))
    with pytest.raises(RuntimeError):
        acc.finalize()


def test_dimensions_preserved_through_finalize():
    acc = VarianceAccumulator(3, 2)
    acc.update(np.zeros((2, 3))).update(np.ones((2, 3)))
    mean, var = acc.finalize()
    assert mean.shape == (2, 3) and var.shape == (2, 3)


def test_two_point_welford_step():
    acc = VarianceAccumulator(1, 1)
    acc.update(np.array([[0.0]])).update(np.array([[1.0]]))
    assert acc._mean[0, 0] == 0.5
    assert acc._m2[0, 0] == 0.5
    mean, var = acc.finalize()
    assert mean[0, 0] == 0.5
    assert var[0, 0] == 0.25  # population variance of {0, 1}, exact


def test_identical_updates_give_exactly_zero_variance():
    acc = VarianceAccumulator(4, 3)
    p = np.full((3, 4), 0.5)
    for _ in range(7):
        acc.update(p)
    _, var = acc.finalize()
    assert np.all(var == 0.0)


def test_streaming_matches_two_pass_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        t = int(rng.integers(2, 101))
        stack = rng.random((t, 4, 5))
        acc = VarianceAccumulator(5, 4)
        for p in stack:
            acc.update(p)
        mean, var = acc.finalize()
        assert np.abs(var - naive_variance(stack)).max() < 1e-10
        assert np.abs(mean - stack.mean(axis=0)).max() < 1e-12


def test_update_order_does_not_matter():
    rng = np.random.default_rng(4)
    stack = rng.random((20, 3, 3))
    perm = rng.permutation(20)
    a = VarianceAccumulator(3, 3)
    b = VarianceAccumulator(3, 3)
    for p in stack:
        a.update(p)
    for p in stack[perm]:
        b.update(p)
    va = a.finalize()[1]
    vb = b.finalize()[1]
    assert np.abs(va - vb).max() < 1e-12


def test_variance_bounded_by_quarter():
    rng = np.random.default_rng(5)
    for _ in range(20):
        stack = rng.random((int(rng.integers(2, 40)), 6, 6))
        acc = VarianceAccumulator(6, 6)
        for p in stack:
            acc.update(p)
        _, var = acc.finalize()
        assert var.min() >= 0.0
        assert var.max() <= 0.25 * (1 + 1e-12)


def test_dimension_mismatch_rejected():
    acc = VarianceAccumulator(2, 2)
    with pytest.raises(ValueError):
        acc.update(np.zeros((3, 2)))


def test_merge_equals_sequential():
    rng = np.random.default_rng(6)
    stack = rng.random((12, 2, 5))
    whole = VarianceAccumulator(5, 2)
    for p in stack:
        whole.update(p)
    left = VarianceAccumulator(5, 2)
    right = VarianceAccumulator(5, 2)
    for p in stack[:5]:
        left.update(p)
    for p in stack[5:]:
        right.update(p)
    left.merge(right)
    assert left.count == 12
    assert np.abs(left.finalize()[1] - whole.finalize()[1]).max() < 1e-12


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(t_steps=1)
    with pytest.raises(ValueError):
        McConfig(dropout_p=0.0)
    with pytest.raises(ValueError):
        McConfig(dropout_p=1.0)


def test_mc_predict_constant_predictor_has_zero_variance():
    img = np.zeros((4, 4))
    mean, var = mc_predict(
        ConstantPredictor(0.7), img, McConfig(t_steps=10), np.random.default_rng(0)
    )
    assert np.all(var == 0.0)
    assert np.all(mean == 0.7)


def test_mc_predict_pass_count_enforced():
    class ShortPredictor(ConstantPredictor):
        def predict_passes(self, img, t_steps, dropout_p, rng):
            return super().predict_passes(img, t_steps - 1, dropout_p, rng)

    with pytest.raises(RuntimeError):
        mc_predict(
            ShortPredictor(0.5),
            np.zeros((2, 2)),
            McConfig(t_steps=5),
            np.random.default_rng(0),
        )
