import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lexlift.errors import DataError
from lexlift.pooling import gather_word_initial, pool_dual


def test_pool_is_elementwise_mean(rng):
    a = rng.normal(size=(7, 3))
    b = rng.normal(size=(7, 3))
    pooled = pool_dual(a, b)
    for i in range(7):
        for j in range(3):
            assert pooled[i, j] == pytest.approx((a[i, j] + b[i, j]) / 2, rel=1e-15)


def test_pool_idempotent_and_commutative(rng):
    a = rng.normal(size=(4, 2))
    b = rng.normal(size=(4, 2))
    assert np.array_equal(pool_dual(a, a), a)
    assert np.array_equal(pool_dual(a, b), pool_dual(b, a))


def test_pool_cancellation(rng):
    a = rng.normal(size=5)
    assert np.all(pool_dual(a, -a) == 0.0)


def test_pool_shape_mismatch():
    with pytest.raises(DataError):
        pool_dual(np.zeros((3, 2)), np.zeros((4, 2)))


@given(st.lists(st.booleans(), min_size=0, max_size=40))
def test_gather_matches_index_filter(mask):
    logits = np.arange(len(mask) * 2, dtype=np.float64).reshape(len(mask), 2)
    got = gather_word_initial(logits, mask)
    expected = [logits[i] for i, keep in enumerate(mask) if keep]
    assert got.shape == (len(expected), 2)
    for row, exp in zip(got, expected):
        assert np.array_equal(row, exp)


def test_gather_length_mismatch():
    with pytest.raises(DataError):
        gather_word_initial(np.zeros((3, 2)), [True, False])


def test_gather_keeps_order():
    logits = np.array([[0.0], [1.0], [2.0], [3.0]])
    got = gather_word_initial(logits, [False, True, False, True])
    assert got.ravel().tolist() == [1.0, 3.0]
