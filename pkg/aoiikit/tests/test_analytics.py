import math

import numpy as np
import pytest

import aoiikit as aoii

M = 1000


def _symmetric(q_bar_M, m=M):
    return aoii.SourceModel.symmetric(q_bar_M / m)


@pytest.mark.parametrize(
    'policy',
    [
        aoii.AccessPolicy.reactive(),
        aoii.AccessPolicy.random(0.3),
        aoii.AccessPolicy.hybrid(0.7, 0.05),
        aoii.AccessPolicy.hybrid(0, 0),
    ],
)
def test_transition_matrix(policy):
    """Tests that the joint chain is row-stochastic and splits into deliveries."""
    source = aoii.SourceModel(0.1, 0.4)
    matrix, delivered = aoii.joint_transition_matrix(source, policy, 0.6, labeled=True)
    assert matrix.sum(axis=1) == pytest.approx(np.ones(4), abs=1e-15)
    assert np.all(delivered <= matrix + 1e-15)


def test_transition_matrix_no_delivery():
    """Tests that without deliveries only source moves remain."""
    source = aoii.SourceModel(0.1, 0.4)
    matrix = aoii.joint_transition_matrix(source, aoii.AccessPolicy.random(0.5), 0)
    assert matrix[0] == pytest.approx([0.9, 0, 0.1, 0])
    assert matrix[3] == pytest.approx([0, 0.4, 0, 0.6])


def test_closed_form_balance():
    """Tests that the closed-form distribution satisfies the balance equations."""
    source = aoii.SourceModel(0.03, 0.2)
    policy = aoii.AccessPolicy.hybrid(0.9, 0.02)
    chain = aoii.joint_stationary_closed_form(source, policy, 0.7)
    assert chain.stationary.sum() == pytest.approx(1)
    balance = chain.stationary @ chain.transition
    assert balance == pytest.approx(chain.stationary, abs=1e-14)
    assert chain.pi00 + chain.pi01 == pytest.approx(source.pi0)


def test_degenerate_chain():
    """Tests that silent nodes leave the balance equations unsolvable."""
    source = aoii.SourceModel.symmetric(0.5)
    policy = aoii.AccessPolicy.hybrid(0, 0)
    with pytest.raises(aoii.DegenerateChainError):
        aoii.joint_stationary_closed_form(source, policy, 1.0)
    cycle = aoii.error_cycle(source, policy, 1.0)
    assert aoii.aoii_general(cycle) == pytest.approx(1.0)
    assert aoii.aoii_symmetric(0.5, 10, policy, 1.0) == pytest.approx(1.0)


def test_no_error():
    """Tests that a lone reactive node is never wrong."""
    report = aoii.analyze(aoii.SourceModel(0.1, 0.3), aoii.AccessPolicy.reactive(), 1)
    assert report.cycle.no_error
    assert report.aoii == 0
    assert report.p_miss == 0


@pytest.mark.parametrize('q_bar_M', [1e-3, 0.1, 1.0, 10.0])
@pytest.mark.parametrize(
    'policy',
    [
        aoii.AccessPolicy.reactive(),
        aoii.AccessPolicy.random(1 / M),
        aoii.AccessPolicy.hybrid(1, 5e-4),
        aoii.AccessPolicy.hybrid(0.3, 2e-3),
    ],
)
def test_symmetric_matches_general(q_bar_M, policy):
    """Tests that the symmetric closed form agrees with the renewal form."""
    source = _symmetric(q_bar_M)
    gamma = aoii.success_prob(M, aoii.activity(source, policy), 'exact')
    general = aoii.aoii_general(aoii.error_cycle(source, policy, gamma))
    symmetric = aoii.aoii_symmetric(source, M, policy, gamma)
    assert symmetric == pytest.approx(general, rel=1e-10)


def test_symmetric_rejects_asymmetric():
    with pytest.raises(ValueError, match='asymmetric'):
        source = aoii.SourceModel(0.1, 0.2)
        aoii.aoii_symmetric(source, 10, aoii.AccessPolicy.reactive(), 1)


@pytest.mark.parametrize('alpha', [1e-4, 1e-3, 0.01, 0.5])
def test_throughput_form(alpha):
    """Tests that the random policy age is a function of the throughput."""
    q_bar = 1e-4
    policy = aoii.AccessPolicy.random(alpha)
    gamma = aoii.success_prob(M, alpha, 'exact')
    expected = aoii.aoii_symmetric(q_bar, M, policy, gamma)
    S = M * alpha * gamma
    result = aoii.aoii_random_throughput_form(q_bar, M, S)
    assert result == pytest.approx(expected, rel=1e-10)


def test_reactive_plateau():
    """Tests that the reactive policy age is close to M at low dynamics."""
    policy = aoii.AccessPolicy.reactive()
    report = aoii.analyze(_symmetric(1e-3), policy, M, 'exponential')
    assert report.aoii == pytest.approx(M, rel=0.02)


def test_random_scaling():
    """Tests that the random policy age scales as e^2 q_bar M^2."""
    source = _symmetric(1e-3)
    report = aoii.analyze(source, aoii.AccessPolicy.random(1 / M), M, 'exponential')
    scaled = report.aoii / (source.q_bar * M ** 2)
    assert scaled == pytest.approx(math.e ** 2, rel=0.02)


@pytest.mark.parametrize(
    'policy',
    [
        aoii.AccessPolicy.reactive(),
        aoii.AccessPolicy.random(1 / M),
        aoii.AccessPolicy.hybrid(1, 5e-4),
    ],
)
def test_high_dynamics_limit(policy):
    """Tests the age of a source that changes state in every slot."""
    report = aoii.analyze(aoii.SourceModel.symmetric(1), policy, M, 'exponential')
    a = policy.alpha_c * report.channel.gamma
    assert report.aoii == pytest.approx((1 - a) / (2 - a), abs=1e-12)
    assert report.aoii == pytest.approx(0.5, abs=1e-3)
    if policy.kind == 'reactive':
        assert report.aoii == pytest.approx(0.5, abs=1e-6)


def test_hybrid_approx():
    """Tests the small q_bar approximation against the exact age."""
    q_bar, G = 1e-7, 0.644
    alpha_s = (G / M - q_bar) / (1 - q_bar)
    policy = aoii.AccessPolicy.hybrid(1, alpha_s)
    exact = aoii.analyze(aoii.SourceModel.symmetric(q_bar), policy, M, 'exponential')
    assert aoii.aoii_hybrid_approx(q_bar, M, G) == pytest.approx(exact.aoii, rel=0.01)
    assert aoii.aoii_hybrid_approx(q_bar, M, 0) == np.inf


@pytest.mark.parametrize('eta', [1.0, 0.01])
def test_reactive_missed_detection(eta):
    """Tests that reactive missed detections do not depend on the asymmetry."""
    source = aoii.SourceModel.from_rate(1e-5, eta)
    report = aoii.analyze(source, aoii.AccessPolicy.reactive(), M, 'exponential')
    assert report.p_miss == pytest.approx(1 - math.exp(-0.01), rel=1e-10)


def test_missed_detection_critical_state():
    """Tests that the monitored state selects the exit probability."""
    source = aoii.SourceModel(0.01, 0.1)
    policy = aoii.AccessPolicy.hybrid(1, 0.05)
    gamma = 0.5
    for state, q in ((1, 0.1), (0, 0.01)):
        expected = q * 0.5 / (q + 0.025 * (1 - q))
        result = aoii.missed_detection(source, policy, gamma, state)
        assert result == pytest.approx(expected)
    with pytest.raises(ValueError):
        aoii.missed_detection(source, policy, gamma, 2)


@pytest.mark.parametrize(
    'source, policy',
    [
        (aoii.SourceModel.symmetric(1e-3), aoii.AccessPolicy.hybrid(1, 0.01)),
        (aoii.SourceModel.symmetric(0.05), aoii.AccessPolicy.random(0.2)),
        (aoii.SourceModel.symmetric(0.3), aoii.AccessPolicy.hybrid(0.5, 0.5)),
        (aoii.SourceModel.from_rate(0.01, 0.1), aoii.AccessPolicy.reactive()),
    ],
)
def test_aoii_decreasing_in_gamma(source, policy):
    """Tests that better channels never increase the age."""
    gammas = np.linspace(0.05, 0.95, 19)
    ages = [aoii.aoii_general(aoii.error_cycle(source, policy, g)) for g in gammas]
    assert np.all(np.diff(ages) <= 1e-12 * np.abs(ages[:-1]))


def test_missed_detection_decreasing():
    """Tests that missed detections fall as idle deliveries grow."""
    source = aoii.SourceModel.from_rate(0.01, 0.5)
    for gamma in (0.2, 0.6, 1.0):
        p_miss = [
            aoii.missed_detection(source, aoii.AccessPolicy.hybrid(0.5, a), gamma)
            for a in np.linspace(0, 1, 21)
        ]
        assert np.all(np.diff(p_miss) < 0)


@pytest.mark.parametrize('q01, q10', [(1e-3, 1e-3), (0.01, 0.2), (0.4, 0.05)])
@pytest.mark.parametrize('gamma', [0.1, 0.5, 0.9])
def test_error_period_moments(q01, q10, gamma):
    """Tests that the second moment bounds the squared mean."""
    source = aoii.SourceModel(q01, q10)
    for policy in (
        aoii.AccessPolicy.reactive(),
        aoii.AccessPolicy.random(0.1),
        aoii.AccessPolicy.hybrid(0.9, 0.02),
    ):
        cycle = aoii.error_cycle(source, policy, gamma)
        assert cycle.e_w >= 1
        assert cycle.e_w2 >= cycle.e_w ** 2
