import math

import numpy as np
import pytest

import aoiikit as aoii
from aoiikit import oracle


def test_power_iteration_matches_closed_form():
    """Tests the closed-form stationary distribution on random parameter sets."""
    rng = np.random.default_rng(2021)
    cfg = aoii.OracleConfig()
    worst = 0
    for _ in range(1000):
        q01, q10 = rng.uniform(0.001, 1, size=2)
        alpha_c, alpha_s = rng.uniform(0, 1, size=2)
        gamma = 1 - rng.uniform(0, 1)  # in (0, 1]
        source = aoii.SourceModel(q01, q10)
        policy = aoii.AccessPolicy(alpha_c, alpha_s)
        chain = aoii.joint_stationary_closed_form(source, policy, gamma)
        v = aoii.stationary_power_iteration(chain.transition, cfg)
        worst = max(worst, 0.5 * np.abs(v - chain.stationary).sum())
    assert worst < 1e-10


def test_power_iteration_limit():
    """Tests that running out of squarings raises an error."""
    source = aoii.SourceModel.symmetric(0.01)
    matrix = aoii.joint_transition_matrix(source, aoii.AccessPolicy.random(0.1), 0.5)
    with pytest.raises(aoii.ConvergenceError):
        aoii.stationary_power_iteration(matrix, aoii.OracleConfig(power_iter_max=1))
    with pytest.raises(ValueError):
        aoii.stationary_power_iteration(np.eye(3))


@pytest.mark.parametrize('p', [0.003, 0.3, 1.0])
def test_moments_truncated(p):
    """Tests truncated geometric sums against the closed-form moments."""
    mean, second = aoii.moments_truncated(p)
    assert mean == pytest.approx(1 / p, rel=1e-8)
    assert second == pytest.approx((2 - p) / p ** 2, rel=1e-8)


def test_moments_truncated_short():
    """Tests that a short truncation warns about the neglected tail."""
    with pytest.warns(aoii.AoIIWarning):
        mean, _ = aoii.moments_truncated(0.01, cutoff=10)
    assert mean < 100
    with pytest.raises(ValueError):
        aoii.moments_truncated(0)


def test_mixture_area():
    """Tests the mean error period area against the closed-form moments."""
    source = aoii.SourceModel(0.02, 0.3)
    cycle = aoii.error_cycle(source, aoii.AccessPolicy.hybrid(1, 0.05), 0.6)
    area = aoii.mixture_area(cycle)
    assert area == pytest.approx((cycle.e_w2 + cycle.e_w) / 2, rel=1e-7)


def test_chain_sample_symmetric():
    """Tests the closed forms against a direct simulation of the joint chain."""
    source = aoii.SourceModel.symmetric(0.2)
    policy = aoii.AccessPolicy.random(0.3)
    gamma = 0.6
    cfg = aoii.OracleConfig(chain_sample_slots=300_000, seed=1)
    labeled = aoii.joint_transition_matrix(source, policy, gamma, labeled=True)
    sample = aoii.chain_sample_aoii(labeled, cfg)
    cycle = aoii.error_cycle(source, policy, gamma)
    assert sample.slots == 300_000
    assert sample.aoii == pytest.approx(aoii.aoii_general(cycle), rel=0.05)
    assert sample.e_w == pytest.approx(cycle.e_w, rel=0.05)
    assert sample.ci95 > 0


def test_chain_sample_missed_detection():
    """Tests the missed-detection probability of an asymmetric source."""
    source = aoii.SourceModel.from_rate(0.05, 0.1)
    policy = aoii.AccessPolicy.hybrid(1, 0.1)
    gamma = 0.5
    cfg = aoii.OracleConfig(chain_sample_slots=300_000, seed=7)
    labeled = aoii.joint_transition_matrix(source, policy, gamma, labeled=True)
    sample = aoii.chain_sample_aoii(labeled, cfg)
    expected = aoii.missed_detection(source, policy, gamma)
    sigma = math.sqrt(expected * (1 - expected) / sample.visits)
    assert sample.visits > 1000
    assert abs(sample.p_miss - expected) < 3 * sigma
    unlabeled = aoii.chain_sample_aoii(labeled[0], cfg)
    assert np.isnan(unlabeled.p_miss)
    assert unlabeled.aoii == sample.aoii


def test_chain_sample_chunks(monkeypatch):
    """Tests that ages are summed exactly across chunks of uniforms."""
    matrix = np.zeros((4, 4))
    matrix[:, 2] = 1  # every state moves to the error state (1, 0)
    cfg = aoii.OracleConfig(chain_sample_slots=1001, seed=2)
    sample = aoii.chain_sample_aoii(matrix, cfg)
    monkeypatch.setattr(oracle, 'CHUNK', 97)
    chunked = aoii.chain_sample_aoii(matrix, cfg)
    assert sample.aoii == chunked.aoii == 501
    assert sample.ci95 == pytest.approx(chunked.ci95, rel=1e-12)
    assert np.isnan(chunked.e_w)
    assert chunked.error_periods == 0
