import math

import numpy as np
import pytest

import aoiikit as aoii

M = 5


def _analytic(source, policy, m=M):
    return aoii.analyze(source, policy, m, 'exact')


def test_aoii_recursion():
    """Tests that the age grows during errors and resets on correct slots."""
    omega = aoii.aoii_recursion([0, 1, 1, 0, 1, 1, 1])
    assert omega.tolist() == [0, 1, 2, 0, 1, 2, 3]
    omega = aoii.aoii_recursion([[1, 1, 0], [0, 1, 1]], aoii=[3, 0])
    assert omega.tolist() == [[4, 5, 0], [0, 1, 2]]


@pytest.mark.parametrize(
    'policy',
    [
        aoii.AccessPolicy.reactive(),
        aoii.AccessPolicy.random(0.2),
        aoii.AccessPolicy.hybrid(1, 0.1),
    ],
)
def test_simulation_matches_closed_form(policy):
    """Tests empirical metrics of symmetric sources against the closed forms."""
    source = aoii.SourceModel.symmetric(0.1)
    cfg = aoii.SimConfig(M, source, policy, horizon=200_000, warmup=1000, seed=3)
    metrics = aoii.run(cfg)
    report = _analytic(source, policy)
    assert metrics.slots == 199_000
    assert metrics.aoii_mean == pytest.approx(report.aoii, rel=0.05)
    assert metrics.aoii_from_periods == pytest.approx(metrics.aoii_mean, rel=0.05)
    assert metrics.realized_load == pytest.approx(report.channel.load_G, rel=0.05)
    assert metrics.realized_gamma == pytest.approx(report.channel.gamma, rel=0.05)
    assert metrics.e_w == pytest.approx(report.cycle.e_w, rel=0.05)
    assert metrics.e_y == pytest.approx(report.cycle.e_y, rel=0.05)
    assert metrics.ci95_aoii > 0


@pytest.mark.parametrize('eta', [1.0, 0.1])
def test_reactive_missed_detection(eta):
    """Tests reactive missed detections within three standard deviations."""
    source = aoii.SourceModel.from_rate(0.02, eta)
    policy = aoii.AccessPolicy.reactive()
    cfg = aoii.SimConfig(M, source, policy, horizon=200_000, warmup=1000, seed=11)
    metrics = aoii.run(cfg)
    expected = _analytic(source, policy).p_miss
    sigma = math.sqrt(expected * (1 - expected) / metrics.visits)
    assert expected == pytest.approx(1 - 0.98 ** (M - 1))
    assert abs(metrics.p_miss - expected) < 3 * sigma


def test_seed_determinism():
    """Tests that a seed fixes every random draw."""
    source = aoii.SourceModel.symmetric(0.05)
    policy = aoii.AccessPolicy.random(0.2)
    runs = [
        aoii.run(
            aoii.SimConfig(3, source, policy, horizon=20_000, warmup=500, seed=seed)
        )
        for seed in (42, 42, 43)
    ]
    assert runs[0].aoii_mean == runs[1].aoii_mean
    assert runs[0].transmissions == runs[1].transmissions
    assert runs[0].transmissions != runs[2].transmissions


def test_block_boundaries():
    """Tests that horizons that are not a multiple of the block size work."""
    source = aoii.SourceModel.symmetric(0.1)
    policy = aoii.AccessPolicy.reactive()
    with aoii.rc.context({'simulator.block': 100}):
        metrics = aoii.run(aoii.SimConfig(2, source, policy, horizon=12_345, warmup=45))
    assert metrics.slots == 12_300
    assert metrics.warmup == 45
    assert np.isfinite(metrics.aoii_mean)


def test_config_validation():
    source = aoii.SourceModel.symmetric(0.1)
    policy = aoii.AccessPolicy.reactive()
    with pytest.raises(ValueError, match='warmup'):
        aoii.SimConfig(2, source, policy, horizon=100, warmup=100)
    with pytest.raises(ValueError):
        aoii.SimConfig(2, source, policy, horizon=0)
    with aoii.rc.context({'simulator.maxcells': 4}):
        with pytest.raises(ValueError, match='maxcells'):
            aoii.SimConfig(5, source, policy, horizon=1000, warmup=0)
    cfg = aoii.SimConfig(2, aoii.SourceModel.symmetric(1e-4), policy, horizon=10 ** 6)
    assert cfg.resolved_warmup() == 100_000


def test_batch_ci():
    """Tests the batch-means confidence interval."""
    with aoii.rc.context({'simulator.minbatches': 10}):
        with pytest.warns(aoii.AoIIWarning):
            assert np.isnan(aoii.batch_ci([1.0, 2.0, 3.0]))
    samples = np.arange(20, dtype=float)
    expected = 1.959963984540054 * samples.std(ddof=1) / math.sqrt(20)
    assert aoii.batch_ci(samples) == pytest.approx(expected)


def test_initial_state():
    """Tests the derived ages and visit flags of a fresh node state."""
    state = aoii.NodeState.initial([0, 1, 1], critical_state=1)
    assert state.aoii.tolist() == [0, 0, 0]
    assert state.error_run.tolist() == [0, 0, 0]
    assert state.visit_active.tolist() == [False, True, True]
    assert state.visit_notified.tolist() == state.visit_active.tolist()
    state.slot = 4
    state.x_hat[1] = 0
    state.error_start[1] = 2
    state.correct_start[:] = 0
    assert state.aoii.tolist() == [0, 3, 0]
    assert state.correct_run.tolist() == [5, 0, 5]
    state.visit_start[1:] = 2, 1
    state.last_delivery[2] = 3
    assert state.visit_notified.tolist() == [False, False, True]


def test_block_invariance():
    """Tests that a seed fixes the sample path for any block size."""
    source = aoii.SourceModel.symmetric(0.05)
    policy = aoii.AccessPolicy.hybrid(0.7, 0.2)
    cfg = aoii.SimConfig(3, source, policy, horizon=20_000, warmup=500, seed=8)
    default = aoii.run(cfg)
    with aoii.rc.context({'simulator.block': 64}):
        small = aoii.run(cfg)
    for name in ('transmissions', 'successes', 'visits', 'error_periods'):
        assert getattr(small, name) == getattr(default, name)
    for name in ('aoii_mean', 'p_miss', 'e_w', 'e_w2', 'e_y', 'ci95_aoii'):
        assert getattr(small, name) == pytest.approx(getattr(default, name), rel=1e-12)


def test_large_network():
    """Tests a thousand nodes at unit dynamics over a long horizon."""
    m = 1000
    source = aoii.SourceModel.symmetric(1 / m)
    policy = aoii.AccessPolicy.random(1 / m)
    cfg = aoii.SimConfig(m, source, policy, horizon=200_000, warmup=10_000, seed=5)
    metrics = aoii.run(cfg)
    report = _analytic(source, policy, m)
    assert metrics.realized_load == pytest.approx(1, rel=0.02)
    assert metrics.realized_gamma == pytest.approx(report.channel.gamma, rel=0.02)
    assert metrics.aoii_mean == pytest.approx(report.aoii, rel=0.1)


@pytest.mark.parametrize(
    'policy', [aoii.AccessPolicy.random(0.2), aoii.AccessPolicy.hybrid(1, 0.1)]
)
def test_asymmetric_missed_detection(policy):
    """Tests missed detections of a rarely visited critical state."""
    source = aoii.SourceModel.from_rate(0.01, 0.01)
    cfg = aoii.SimConfig(M, source, policy, horizon=400_000, warmup=2000, seed=21)
    metrics = aoii.run(cfg)
    expected = _analytic(source, policy).p_miss
    assert metrics.visits > 5000
    if policy.kind == 'random':
        sigma = math.sqrt(expected * (1 - expected) / metrics.visits)
        assert abs(metrics.p_miss - expected) < 4 * sigma
    else:
        assert metrics.p_miss == pytest.approx(expected, rel=0.08)


def test_critical_state_zero():
    """Tests missed detections of long visits to state zero."""
    source = aoii.SourceModel.from_rate(0.01, 0.01)
    policy = aoii.AccessPolicy.random(0.2)
    cfg = aoii.SimConfig(
        M, source, policy, horizon=400_000, warmup=2000, seed=4, critical_state=0
    )
    metrics = aoii.run(cfg)
    expected = aoii.analyze(source, policy, M, 'exact', critical_state=0).p_miss
    assert expected < _analytic(source, policy).p_miss
    sigma = math.sqrt(expected * (1 - expected) / metrics.visits)
    assert abs(metrics.p_miss - expected) < 4 * sigma


@pytest.mark.parametrize('alpha_s', [0.05, 0.1, 0.2])
def test_error_period_sweep(alpha_s):
    """Tests mean error periods along the idle access probability."""
    m = 10
    source = aoii.SourceModel.symmetric(0.01 / m)
    policy = aoii.AccessPolicy.hybrid(1, alpha_s)
    cfg = aoii.SimConfig(m, source, policy, horizon=5_000_000, warmup=10_000)
    metrics = aoii.run(cfg)
    report = _analytic(source, policy, m)
    assert metrics.error_periods > 10_000
    assert metrics.e_w == pytest.approx(report.cycle.e_w, rel=0.03)
    assert metrics.e_w2 >= metrics.e_w ** 2
