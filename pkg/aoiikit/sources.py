#!/usr/bin/env python3
"""
Two-state Markov sources, channel access policies, and the channel-level
quantities they induce on a slotted ALOHA collision channel.
"""
from dataclasses import dataclass

import numpy as np

from .internals import _to_count, _to_mode, _to_prob, docstring

__all__ = [
    'SourceModel',
    'AccessPolicy',
    'ChannelStats',
    'stationary',
    'avg_transition_prob',
    'activity',
    'success_prob',
    'channel_stats',
]

# Tolerance used to decide whether a source is symmetric
SYMMETRIC_TOL = 1e-12

docstring.snippets['sources.source'] = """
source : SourceModel
    The two-state Markov source.
"""

docstring.snippets['sources.policy'] = """
policy : AccessPolicy
    The channel access policy.
"""

docstring.snippets['sources.mode'] = """
mode : {'exact', 'exponential'}, optional
    The success probability model. Default is :rc:`gamma.mode`.
"""


@dataclass(frozen=True)
class SourceModel(object):
    """
    A two-state discrete time Markov chain with per-slot transition
    probabilities `q01` (from 0 to 1) and `q10` (from 1 to 0).

    Parameters
    ----------
    q01, q10 : float
        The transition probabilities. At least one must be positive.
    """
    q01: float
    q10: float

    def __post_init__(self):
        q01 = _to_prob(self.q01, 'q01')
        q10 = _to_prob(self.q10, 'q10')
        if q01 + q10 <= 0:
            raise ValueError(
                'Invalid frozen source with q01 = q10 = 0. The stationary '
                'distribution is undefined.'
            )
        object.__setattr__(self, 'q01', q01)
        object.__setattr__(self, 'q10', q10)

    @classmethod
    def symmetric(cls, q):
        """
        Return a source with ``q01 = q10 = q``.
        """
        return cls(q, q)

    @classmethod
    def from_rate(cls, q_bar, eta=1.0):
        """
        Return the source with average transition probability `q_bar` and
        asymmetry ratio ``eta = q01 / q10``. The inverse relations are
        ``q10 = q_bar * (1 + eta) / (2 * eta)`` and ``q01 = eta * q10``.

        Parameters
        ----------
        q_bar : float
            The average per-slot transition probability in (0, 1].
        eta : float, optional
            The positive asymmetry ratio. Default is ``1``.
        """
        q_bar = _to_prob(q_bar, 'q_bar')
        if q_bar <= 0:
            raise ValueError(f'Invalid q_bar {q_bar!r}. Must be positive.')
        if not np.isfinite(eta) or eta <= 0:
            raise ValueError(f'Invalid eta {eta!r}. Must be positive and finite.')
        q10 = q_bar * (1 + eta) / (2 * eta)
        q01 = q_bar * (1 + eta) / 2
        if max(q01, q10) > 1 + 1e-12:
            raise ValueError(
                f'No source has q_bar = {q_bar!r} and eta = {eta!r}: this needs '
                f'q01 = {q01!r} and q10 = {q10!r}. With this eta q_bar must be '
                f'at most {2 * min(eta, 1) / (1 + eta)!r}.'
            )
        return cls(min(q01, 1.0), min(q10, 1.0))

    @property
    def q00(self):
        return 1.0 - self.q01

    @property
    def q11(self):
        return 1.0 - self.q10

    @property
    def pi0(self):
        return self.q10 / (self.q01 + self.q10)

    @property
    def pi1(self):
        return self.q01 / (self.q01 + self.q10)

    @property
    def q_bar(self):
        return 2 * self.q01 * self.q10 / (self.q01 + self.q10)

    @property
    def eta(self):
        return self.q01 / self.q10 if self.q10 > 0 else np.inf

    @property
    def is_symmetric(self):
        return abs(self.q01 - self.q10) <= SYMMETRIC_TOL


@dataclass(frozen=True)
class AccessPolicy(object):
    """
    A hybrid channel access policy. Nodes transmit with probability
    `alpha_c` in slots where their source changed state and with
    probability `alpha_s` in the remaining slots.
    """
    alpha_c: float
    alpha_s: float

    def __post_init__(self):
        object.__setattr__(self, 'alpha_c', _to_prob(self.alpha_c, 'alpha_c'))
        object.__setattr__(self, 'alpha_s', _to_prob(self.alpha_s, 'alpha_s'))

    @classmethod
    def random(cls, alpha):
        """
        Transmit with probability `alpha` in every slot.
        """
        return cls(alpha, alpha)

    @classmethod
    def reactive(cls):
        """
        Transmit only in the slot of a state change.
        """
        return cls(1.0, 0.0)

    @classmethod
    def hybrid(cls, alpha_c, alpha_s):
        """
        Transmit with probability `alpha_c` on state changes and `alpha_s` otherwise.
        """
        return cls(alpha_c, alpha_s)

    @property
    def kind(self):
        """
        The name of the policy family: ``'reactive'``, ``'random'``, or ``'hybrid'``.
        """
        if self.alpha_c == 1 and self.alpha_s == 0:
            return 'reactive'
        elif self.alpha_c == self.alpha_s:
            return 'random'
        else:
            return 'hybrid'


@dataclass(frozen=True)
class ChannelStats(object):
    """
    Channel-level quantities of `M` nodes using the same source and policy.

    Attributes
    ----------
    rho : float
        The per-slot transmission probability of one node.
    load_G : float
        The average number of transmitted packets per slot.
    gamma : float
        The probability that a transmitted packet is the only one in its slot.
    throughput_S : float
        The average number of delivered packets per slot.
    M : int
        The number of nodes.
    mode : str
        The success probability model used for `gamma`.
    """
    rho: float
    load_G: float
    gamma: float
    throughput_S: float
    M: int
    mode: str


@docstring.add_snippets
def stationary(source):
    """
    Return the stationary distribution of the source.

    Parameters
    ----------
    %(sources.source)s

    Returns
    -------
    pi0, pi1 : float
        The long-run fractions of slots spent in states 0 and 1.
    """
    return source.pi0, source.pi1


def avg_transition_prob(source):
    """
    Return the average per-slot transition probability
    ``q_bar = pi0 * q01 + pi1 * q10 = 2 * q01 * q10 / (q01 + q10)``.
    """
    return source.q_bar


@docstring.add_snippets
def activity(source, policy):
    """
    Return the probability that a node transmits in a given slot.

    Parameters
    ----------
    %(sources.source)s
    %(sources.policy)s

    Returns
    -------
    rho : float
        ``q_bar * alpha_c + (1 - q_bar) * alpha_s``.
    """
    if isinstance(source, SourceModel):
        q_bar = source.q_bar
    else:
        q_bar = _to_prob(source, 'q_bar')
    return q_bar * policy.alpha_c + (1 - q_bar) * policy.alpha_s


@docstring.add_snippets
def success_prob(M, rho, mode=None):
    """
    Return the probability that a transmitted packet is the only one in its slot.

    Parameters
    ----------
    M : int
        The number of nodes.
    rho : float
        The per-slot transmission probability of each node.
    %(sources.mode)s

    Returns
    -------
    gamma : float
        ``(1 - rho) ** (M - 1)`` in exact mode and ``exp(-rho * M)`` in
        exponential mode. A single node has no contenders, so ``M = 1``
        returns ``1`` in both modes.
    """
    M = _to_count(M, 'M')
    rho = _to_prob(rho, 'rho')
    mode = _to_mode(mode)
    if M == 1:
        return 1.0
    if mode == 'exact':
        return (1 - rho) ** (M - 1)
    else:
        return float(np.exp(-rho * M))


@docstring.add_snippets
def channel_stats(source, policy, M, mode=None):
    """
    Return the `ChannelStats` of `M` nodes sharing the channel.

    Parameters
    ----------
    %(sources.source)s
    %(sources.policy)s
    M : int
        The number of nodes.
    %(sources.mode)s
    """
    M = _to_count(M, 'M')
    mode = _to_mode(mode)
    rho = activity(source, policy)
    gamma = success_prob(M, rho, mode)
    load = rho * M
    return ChannelStats(
        rho=rho, load_G=load, gamma=gamma, throughput_S=load * gamma, M=M, mode=mode,
    )
