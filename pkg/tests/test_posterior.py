import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from audience_ts.errors import InvalidBatch, InvalidDimensions
from audience_ts.posterior import (
    BatchOutcome,
    PosteriorState,
    init_posterior,
    sample_theta,
    sample_theta_draws,
    update_posterior,
)


def test_init_is_uniform_prior():
    s = init_posterior(2, 3)
    np.testing.assert_array_equal(s.alpha, np.ones((2, 3)))
    np.testing.assert_array_equal(s.beta, np.ones((2, 3)))
    assert s.t == 1
    assert init_posterior(1, 1).mean[0, 0] == 0.5
    with pytest.raises(InvalidDimensions):
        init_posterior(0, 3)


def test_conjugate_update():
    s = update_posterior(init_posterior(1, 1), BatchOutcome([[10]], [[3]]))
    assert (s.alpha[0, 0], s.beta[0, 0]) == (4.0, 8.0)
    assert s.t == 2


def test_empty_batch_only_advances_t():
    s0 = init_posterior(2, 2)
    s1 = update_posterior(s0, BatchOutcome.empty(2, 2))
    np.testing.assert_array_equal(s1.alpha, s0.alpha)
    np.testing.assert_array_equal(s1.beta, s0.beta)
    assert s1.t == s0.t + 1


def test_invalid_batches():
    with pytest.raises(InvalidBatch):
        BatchOutcome([[1]], [[2]])
    with pytest.raises(InvalidBatch):
        update_posterior(init_posterior(2, 2), BatchOutcome([[1]], [[0]]))


def test_two_batches_equal_one_merged():
    a = update_posterior(update_posterior(init_posterior(1, 1), BatchOutcome([[5]], [[2]])), BatchOutcome([[7]], [[1]]))
    b = update_posterior(init_posterior(1, 1), BatchOutcome([[12]], [[3]]))
    np.testing.assert_array_equal(a.alpha, b.alpha)
    np.testing.assert_array_equal(a.beta, b.beta)


shapes = st.tuples(st.integers(1, 3), st.integers(1, 3))
batch = shapes.flatmap(
    lambda shape: st.lists(hnp.arrays(np.int64, shape, elements=st.integers(0, 10_000)), min_size=1, max_size=5)
)


@given(batch, st.randoms())
@settings(max_examples=100)
def test_additivity_and_impression_accounting(ns, rnd):
    R, J = ns[0].shape
    batches = [BatchOutcome(n, np.vectorize(lambda x: rnd.randint(0, int(x)))(n).astype(np.int64)) for n in ns]
    seq = init_posterior(R, J)
    for b in batches:
        seq = update_posterior(seq, b)
    merged = batches[0]
    for b in batches[1:]:
        merged = merged.merge(b)
    one = update_posterior(init_posterior(R, J), merged)
    np.testing.assert_array_equal(seq.alpha, one.alpha)
    np.testing.assert_array_equal(seq.beta, one.beta)
    total = sum(b.n for b in batches)
    np.testing.assert_array_equal(seq.alpha + seq.beta - 2, total)
    assert (seq.alpha >= 1).all() and (seq.beta >= 1).all()


def test_uniform_draw_mean():
    rng = np.random.default_rng(1)
    s = init_posterior(1, 1)
    draws = sample_theta_draws(s, 100_000, rng)[:, 0, 0]
    assert abs(draws.mean() - 0.5) < 0.01


def test_concentrated_draw_mean():
    # Beta(1e6, 99e6): analytic mean alpha / (alpha + beta) = 0.01
    s = PosteriorState(np.array([[100_000_000 - 2]]), np.array([[1_000_000 - 1]]))
    assert s.alpha[0, 0] == 1e6 and s.beta[0, 0] == 99e6
    draws = sample_theta_draws(s, 10_000, np.random.default_rng(2))
    assert abs(draws.mean() - 0.01) < 1e-4


def test_sample_theta_reproducible():
    s = init_posterior(3, 2)
    a = [sample_theta(s, 1, np.random.default_rng(9)) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])
    assert a[0].shape == (3,)
    with pytest.raises(IndexError):
        sample_theta(s, 2, np.random.default_rng(0))


def test_posterior_concentrates():
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        s = update_posterior(init_posterior(1, 1), BatchOutcome([[100_000]], [[rng.binomial(100_000, 0.03)]]))
        hits += abs(s.mean[0, 0] - 0.03) < 0.005
    assert hits / 200 >= 0.99
