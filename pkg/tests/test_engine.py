import numpy as np
import pytest

from audience_ts.audience import PopulationModel, build_partition, membership, overlap_geometry
from audience_ts.engine import TestConfig, expected_regret_per_impression, run_test
from audience_ts.environment import Environment
from audience_ts.errors import ConfigMismatch, NonpositivePayoffDenominator
from audience_ts.policy import EconomicParams, Policy
from audience_ts.simlab import REFERENCE_CTR

HALF = build_partition(2, overlap_geometry(0.5))
REFERENCE_ENV = Environment.from_cells(REFERENCE_CTR, HALF)


def brute_force_regret(w, theta, part):
    total = 0.0
    R, J = theta.shape
    for k in range(part.n_tas):
        for j in range(J):
            if k not in part.das[j].members:
                continue
            best = max(theta[r, j] for r in range(R))
            total += part.cond_prob[j, k] * sum(w[r, j] * (best - theta[r, j]) for r in range(R))
    return total


def test_regret_zero_on_best_arms():
    theta = REFERENCE_ENV.true_theta
    w = (theta == theta.max(axis=0)).astype(float)
    assert expected_regret_per_impression(w, theta, HALF) == 0.0


def test_regret_single_context():
    part = build_partition(1, PopulationModel({membership(0): 1.0}))
    w = np.array([[0.25], [0.75]])
    theta = np.array([[0.01], [0.03]])
    assert expected_regret_per_impression(w, theta, part) == pytest.approx(0.25 * (0.03 - 0.01))


def test_regret_uniform_reference_cells():
    w = np.full((2, 3), 0.5)
    got = expected_regret_per_impression(w, REFERENCE_ENV.true_theta, HALF)
    assert got == pytest.approx(brute_force_regret(w, REFERENCE_ENV.true_theta, HALF), abs=1e-15)
    assert got == pytest.approx(0.0175, abs=1e-12)


def test_single_creative_stops_at_first_batch():
    for K, pop in [(1, PopulationModel({membership(0): 1.0})), (2, overlap_geometry(0.3))]:
        part = build_partition(K, pop)
        env = Environment(np.full((1, part.n_das), 0.02), part)
        trace = run_test(TestConfig(1, K, seed=1), env)
        assert trace.stopped_at == 1
        assert trace.final_best.tolist() == [0] * K
        assert trace.correct_identification


def test_deterministic():
    cfg = TestConfig(2, 2, seed=42, max_batches=30)
    a, b = run_test(cfg, REFERENCE_ENV), run_test(cfg, REFERENCE_ENV)
    assert a.n_batches == b.n_batches
    for ra, rb in zip(a.records, b.records):
        np.testing.assert_array_equal(ra.n, rb.n)
        np.testing.assert_array_equal(ra.s, rb.s)
        np.testing.assert_array_equal(ra.ppvr, rb.ppvr)
        assert ra.regret == rb.regret


@pytest.mark.parametrize("policy", list(Policy))
def test_conservation_and_monotone_data(policy):
    trace = run_test(TestConfig(2, 2, policy=policy, seed=3, max_batches=40, stopping=False), REFERENCE_ENV)
    assert trace.n_batches == 40
    cumulative = np.zeros((2, 3), dtype=int)
    for rec in trace.records:
        assert rec.arrivals == 100
        assert (rec.s <= rec.n).all()
        if policy is Policy.ST:
            assert rec.impressions <= rec.arrivals
        else:
            assert rec.impressions == rec.arrivals
        new = cumulative + rec.n
        assert (new >= cumulative).all()
        cumulative = new
    if policy is Policy.ST:
        shown = sum(r.impressions for r in trace.records) / trace.sample_size
        assert abs(shown - 2 / 3) < 0.03


@pytest.mark.parametrize("policy", list(Policy))
def test_stops_at_first_batch_below_threshold(policy):
    cfg = TestConfig(2, 2, policy=policy, seed=8)
    trace = run_test(cfg, REFERENCE_ENV)
    assert not trace.maxed_out
    maxes = [r.max_ppvr for r in trace.records]
    assert maxes[-1] < cfg.stop_threshold
    assert all(m >= cfg.stop_threshold for m in maxes[:-1])
    assert trace.first_below == trace.stopped_at == trace.n_batches
    assert trace.sample_size == 100 * trace.n_batches


def test_stopping_disabled_runs_full_budget():
    trace = run_test(TestConfig(2, 2, seed=8, max_batches=120, stopping=False), REFERENCE_ENV)
    assert trace.n_batches == 120 and trace.maxed_out
    assert trace.first_below is not None


def test_ea_and_st_allocation_is_uniform():
    for policy in (Policy.EA, Policy.ST):
        trace = run_test(TestConfig(2, 2, policy=policy, seed=5, max_batches=5, stopping=False), REFERENCE_ENV)
        for rec in trace.records:
            np.testing.assert_array_equal(rec.w, np.full((2, 3), 0.5))
            assert rec.regret == pytest.approx(0.0175)


def test_config_mismatch():
    with pytest.raises(ConfigMismatch):
        run_test(TestConfig(3, 2), REFERENCE_ENV)
    with pytest.raises(ConfigMismatch):
        run_test(TestConfig(2, 3), REFERENCE_ENV)
    with pytest.raises(ConfigMismatch):
        run_test(TestConfig(2, 2, population=overlap_geometry(0.3)), REFERENCE_ENV)
    run_test(TestConfig(2, 2, population=overlap_geometry(0.5), max_batches=1), REFERENCE_ENV)


def test_nonpositive_payoff_propagates():
    econ = EconomicParams.from_da_costs(1.0, np.full((2, 3), 0.5), HALF)
    with pytest.raises(NonpositivePayoffDenominator):
        run_test(TestConfig(2, 2, econ=econ, max_batches=3), REFERENCE_ENV)


@pytest.mark.slow
def test_ts_regret_falls_over_batches():
    """Mean expected regret per impression is lower at batch 500 than at batch 50."""
    from audience_ts.simlab import default_supports, run_replications, EnvSampler

    sampler = EnvSampler(default_supports(), HALF)
    cfg = TestConfig(2, 2, seed=2024, max_batches=500, stopping=False)
    traces = run_replications(cfg, sampler, 200)
    at50 = np.mean([t.records[49].regret for t in traces])
    at500 = np.mean([t.records[499].regret for t in traces])
    print(f"mean regret per impression: batch 50 = {at50:.5f}, batch 500 = {at500:.5f}")
    assert at500 < at50
