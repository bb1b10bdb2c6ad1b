#!/usr/bin/env python3
"""
Closed-form expressions for the joint (state, estimate) chain of one source,
its error and correct periods, the average age of incorrect information,
and the missed-detection probability.
"""
from dataclasses import dataclass

import numpy as np

from .internals import _to_count, _to_mode, _to_prob, _to_state, docstring
from .internals.warnings import DegenerateChainError
from .sources import (
    AccessPolicy,
    ChannelStats,
    SourceModel,
    activity,
    channel_stats,
)

__all__ = [
    'STATES',
    'JointChainModel',
    'ErrorCycleModel',
    'AnalyticReport',
    'joint_transition_matrix',
    'joint_stationary_closed_form',
    'error_cycle',
    'aoii_general',
    'aoii_symmetric',
    'aoii_random_throughput_form',
    'aoii_hybrid_approx',
    'missed_detection',
    'analyze',
]

#: The (source state, receiver estimate) pairs in matrix order.
STATES = ((0, 0), (0, 1), (1, 0), (1, 1))

docstring.snippets['analytics.args'] = """
source : SourceModel
    The two-state Markov source.
policy : AccessPolicy
    The channel access policy.
gamma : float
    The probability that a transmitted packet is delivered.
"""


@dataclass(frozen=True)
class JointChainModel(object):
    """
    The joint chain of the source state and the receiver estimate.

    Attributes
    ----------
    transition : ndarray
        The 4 x 4 row-stochastic matrix over `STATES`.
    stationary : ndarray
        The stationary probabilities ``(pi00, pi01, pi10, pi11)``.
    normalizer_z : float
        The normalizing constant of the closed-form solution.
    """
    transition: np.ndarray
    stationary: np.ndarray
    normalizer_z: float

    @property
    def pi00(self):
        return self.stationary[0]

    @property
    def pi01(self):
        return self.stationary[1]

    @property
    def pi10(self):
        return self.stationary[2]

    @property
    def pi11(self):
        return self.stationary[3]


@dataclass(frozen=True)
class ErrorCycleModel(object):
    """
    Statistics of the alternating error periods ``W`` and correct periods ``Y``.

    Attributes
    ----------
    c_prime : float
        Probability that an error period takes place in state (0, 1).
    c_dprime : float
        Probability that a correct period takes place in state (0, 0).
    e_w, e_w2 : float
        First and second moment of the error period length. These are
        NaN when error periods never occur.
    e_y : float
        Mean correct period length. Infinite when errors never occur.
    p01, p10 : float
        Per-slot exit probabilities of the error states (0, 1) and (1, 0).
        Error periods spent in each state are geometric on ``{1, 2, ...}``.
    no_error : bool
        Whether the error states are unreachable.
    """
    c_prime: float
    c_dprime: float
    e_w: float
    e_w2: float
    e_y: float
    p01: float = np.nan
    p10: float = np.nan
    no_error: bool = False


@dataclass(frozen=True)
class AnalyticReport(object):
    """
    All closed-form results for one operating point.
    """
    aoii: float
    p_miss: float
    cycle: ErrorCycleModel
    channel: ChannelStats
    source: SourceModel = None
    policy: AccessPolicy = None
    critical_state: int = 1


def _policy_terms(policy, gamma):
    """
    Return the success probabilities on state changes and in other slots.
    """
    gamma = _to_prob(gamma, 'gamma')
    return policy.alpha_c * gamma, policy.alpha_s * gamma


@docstring.add_snippets
def joint_transition_matrix(source, policy, gamma, labeled=False):
    """
    Return the transition matrix of the joint (state, estimate) chain.

    Parameters
    ----------
    %(analytics.args)s
    labeled : bool, optional
        Whether to also return the matrix of transition probabilities
        that include a successful delivery in the slot.

    Returns
    -------
    matrix : ndarray
        The 4 x 4 matrix with rows and columns ordered as `STATES`.
    delivered : ndarray, optional
        The delivery-labeled part of `matrix`. Returned if `labeled` is ``True``.

    Note
    ----
    The source moves first within a slot. A delivery sets the estimate to
    the new state, and a change into the currently estimated state ends
    an error period without any delivery.
    """
    q01, q10 = source.q01, source.q10
    q00, q11 = source.q00, source.q11
    a, b = _policy_terms(policy, gamma)
    matrix = np.array([
        [q00, 0, q01 * (1 - a), q01 * a],  # (0, 0)
        [q00 * b, q00 * (1 - b), 0, q01],  # (0, 1)
        [q10, 0, q11 * (1 - b), q11 * b],  # (1, 0)
        [q10 * a, q10 * (1 - a), 0, q11],  # (1, 1)
    ])
    if not labeled:
        return matrix
    delivered = np.array([
        [q00 * b, 0, 0, q01 * a],
        [q00 * b, 0, 0, q01 * a],
        [q10 * a, 0, 0, q11 * b],
        [q10 * a, 0, 0, q11 * b],
    ])
    return matrix, delivered


@docstring.add_snippets
def joint_stationary_closed_form(source, policy, gamma):
    """
    Return the stationary distribution of the joint chain by solving
    the balance equations in closed form.

    Parameters
    ----------
    %(analytics.args)s

    Returns
    -------
    JointChainModel
        The chain and its stationary distribution.

    Raises
    ------
    DegenerateChainError
        If the normalizer vanishes, e.g. when nodes never transmit.
    """
    q01, q10 = source.q01, source.q10
    a, b = _policy_terms(policy, gamma)
    alpha_c, alpha_s = policy.alpha_c, policy.alpha_s
    rate0 = alpha_c * q01 + alpha_s * (1 - q01)  # leave (0, 0) estimate-wise
    rate1 = alpha_c * q10 + alpha_s * (1 - q10)
    weights = np.array([
        q10 * rate0 * (q10 + (1 - q10) * b),  # z * pi00
        q01 * q10 * rate1 * (1 - a),  # z * pi01
        q01 * q10 * rate0 * (1 - a),  # z * pi10
        q01 * rate1 * (q01 + (1 - q01) * b),  # z * pi11
    ])
    z = weights.sum()
    if not z > 0:
        raise DegenerateChainError(
            f'Degenerate chain for {source!r} and {policy!r} with gamma = {gamma!r}. '
            'The balance equations have no unique solution.'
        )
    matrix = joint_transition_matrix(source, policy, gamma)
    return JointChainModel(transition=matrix, stationary=weights / z, normalizer_z=z)


def _geometric_moments(p):
    """
    Return the first two moments of a geometric variable on ``{1, 2, ...}``.
    """
    if p <= 0:
        return np.inf, np.inf
    return 1 / p, (2 - p) / p ** 2


def _mixture(weight, first, second):
    """
    Mix two values with weights `weight` and ``1 - weight``. Components
    with zero weight are dropped so infinite values do not leak.
    """
    total = 0.0
    for w, value in ((weight, first), (1 - weight, second)):
        if w > 0:
            total += w * value
    return total


@docstring.add_snippets
def error_cycle(source, policy, gamma):
    """
    Return the moments of the error and correct periods.

    Parameters
    ----------
    %(analytics.args)s

    Returns
    -------
    ErrorCycleModel
        The period statistics. If the error states are unreachable the
        `~ErrorCycleModel.no_error` flag is set, the error period moments
        are NaN, and the correct period is infinite.

    Note
    ----
    When nodes never transmit the joint chain has no unique stationary
    distribution. The statistics are then the limit of a random policy
    with vanishing access probability, whose correct periods start in
    the two states in proportion to the stationary source distribution.
    """
    q01, q10 = source.q01, source.q10
    a, b = _policy_terms(policy, gamma)
    try:
        chain = joint_stationary_closed_form(source, policy, gamma)
        pi00, pi11 = chain.pi00, chain.pi11
    except DegenerateChainError:
        pi00, pi11 = q10 ** 2, q01 ** 2  # unnormalized limit

    # Error periods start from (1, 1) into (0, 1) or from (0, 0) into (1, 0)
    p01 = 1 - source.q00 * (1 - b)
    p10 = 1 - source.q11 * (1 - b)
    enter01 = pi11 * q10 * (1 - a)
    enter10 = pi00 * q01 * (1 - a)
    enter = enter01 + enter10
    correct = pi00 * q01 + pi11 * q10
    c_dprime = pi00 * q01 / correct if correct > 0 else np.nan
    if not enter > 0:
        return ErrorCycleModel(
            c_prime=np.nan, c_dprime=c_dprime, e_w=np.nan, e_w2=np.nan,
            e_y=np.inf, p01=p01, p10=p10, no_error=True,
        )

    # Mixture moments of the error period
    c_prime = enter01 / enter
    m01, s01 = _geometric_moments(p01)
    m10, s10 = _geometric_moments(p10)
    e_w = _mixture(c_prime, m01, m10)
    e_w2 = _mixture(c_prime, s01, s10)

    # Correct periods end when the source moves and the change is not delivered
    y00, _ = _geometric_moments(q01 * (1 - a))
    y11, _ = _geometric_moments(q10 * (1 - a))
    e_y = _mixture(c_dprime, y00, y11)
    return ErrorCycleModel(
        c_prime=c_prime, c_dprime=c_dprime, e_w=e_w, e_w2=e_w2, e_y=e_y,
        p01=p01, p10=p10, no_error=False,
    )


def aoii_general(cycle):
    """
    Return the average age of incorrect information of a renewal cycle.

    Parameters
    ----------
    cycle : ErrorCycleModel
        The period statistics from `error_cycle`.

    Returns
    -------
    float
        ``(E[W^2] + E[W]) / (2 * (E[W] + E[Y]))``. This is zero when errors
        never occur and infinite when an error period never ends.
    """
    if cycle.no_error or np.isinf(cycle.e_y):
        return 0.0
    if np.isinf(cycle.e_w):
        return np.inf
    return (cycle.e_w2 + cycle.e_w) / (2 * (cycle.e_w + cycle.e_y))


def aoii_symmetric(q_bar, M, policy, gamma):
    """
    Return the average age of incorrect information of a symmetric source.

    Parameters
    ----------
    q_bar : float or SourceModel
        The transition probability ``q01 = q10``. Asymmetric sources
        are rejected.
    M : int
        The number of nodes.
    policy : AccessPolicy
        The channel access policy.
    gamma : float
        The probability that a transmitted packet is delivered.

    Returns
    -------
    float
        ``q_bar M^2 (1 - alpha_c gamma) / ([q_bar M (1 - alpha_c gamma) + G gamma]
        [2 q_bar M (1 - alpha_c gamma) + G gamma])`` where ``G`` is the load.
    """
    if isinstance(q_bar, SourceModel):
        if not q_bar.is_symmetric:
            raise ValueError(
                f'Source {q_bar!r} is asymmetric. Use aoii_general(error_cycle(...)).'
            )
        q_bar = q_bar.q01
    q_bar = _to_prob(q_bar, 'q_bar')
    M = _to_count(M, 'M')
    gamma = _to_prob(gamma, 'gamma')
    a = policy.alpha_c * gamma
    load = activity(q_bar, policy) * M
    miss = q_bar * M * (1 - a)
    if miss <= 0:
        return 0.0
    delivered = load * gamma
    return q_bar * M ** 2 * (1 - a) / ((miss + delivered) * (2 * miss + delivered))


def aoii_random_throughput_form(q_bar, M, S):
    """
    Return the average age of incorrect information of the random policy
    as a function of the throughput.

    Parameters
    ----------
    q_bar : float
        The transition probability of the symmetric source.
    M : int
        The number of nodes.
    S : float
        The throughput in delivered packets per slot, between 0 and `M`.

    Returns
    -------
    float
        ``q_bar M (M - S) / ([q_bar M + S (1 - q_bar)] [2 q_bar M + S (1 - 2 q_bar)])``.
    """
    q_bar = _to_prob(q_bar, 'q_bar')
    M = _to_count(M, 'M')
    if not 0 <= S <= M:
        raise ValueError(f'Invalid throughput S = {S!r}. Must lie in [0, {M}].')
    if q_bar == 0:
        return 0.0
    num = q_bar * M * (M - S)
    return num / ((q_bar * M + S * (1 - q_bar)) * (2 * q_bar * M + S * (1 - 2 * q_bar)))


def aoii_hybrid_approx(q_bar, M, G, alpha_c=1.0):
    """
    Return the small ``q_bar`` approximation of the hybrid policy's average
    age of incorrect information, ``q_bar M^2 (1 - alpha_c gamma) / (G gamma)^2``
    with ``gamma = exp(-G)``. This diverges as the load `G` vanishes.
    """
    q_bar = _to_prob(q_bar, 'q_bar')
    M = _to_count(M, 'M')
    alpha_c = _to_prob(alpha_c, 'alpha_c')
    if G < 0:
        raise ValueError(f'Invalid load G = {G!r}. Must be nonnegative.')
    if G == 0:
        return np.inf
    gamma = np.exp(-G)
    return float(q_bar * M ** 2 * (1 - alpha_c * gamma) / (G * gamma) ** 2)


@docstring.add_snippets
def missed_detection(source, policy, gamma, critical_state=1):
    """
    Return the probability that a visit to the critical state ends without
    any delivery during the visit.

    Parameters
    ----------
    %(analytics.args)s
    critical_state : {0, 1}, optional
        The monitored source state. Default is ``1``.

    Returns
    -------
    float
        ``q (1 - alpha_c gamma) / (q + alpha_s gamma (1 - q))`` where ``q``
        is the probability of leaving the critical state.
    """
    critical_state = _to_state(critical_state)
    a, b = _policy_terms(policy, gamma)
    q = source.q10 if critical_state == 1 else source.q01
    denom = q + b * (1 - q)
    if denom <= 0:  # visit never ends and is never updated after entry
        return 1 - a
    return q * (1 - a) / denom


def analyze(source, policy, M, mode=None, critical_state=1):
    """
    Evaluate every closed form at one operating point.

    Parameters
    ----------
    source : SourceModel
        The two-state Markov source shared by all nodes.
    policy : AccessPolicy
        The channel access policy.
    M : int
        The number of nodes.
    mode : {'exact', 'exponential'}, optional
        The success probability model. Default is :rc:`gamma.mode`.
    critical_state : {0, 1}, optional
        The monitored source state for the missed-detection probability.

    Returns
    -------
    AnalyticReport
        The average age of incorrect information, the missed-detection
        probability, and the intermediate period and channel statistics.
    """
    mode = _to_mode(mode)
    channel = channel_stats(source, policy, M, mode)
    cycle = error_cycle(source, policy, channel.gamma)
    return AnalyticReport(
        aoii=aoii_general(cycle),
        p_miss=missed_detection(source, policy, channel.gamma, critical_state),
        cycle=cycle,
        channel=channel,
        source=source,
        policy=policy,
        critical_state=_to_state(critical_state),
    )
