#!/usr/bin/env python3
"""
Brute-force verifiers for the closed forms: power iteration for stationary
distributions, truncated sums for geometric moments, and a direct sampler
of the single-source joint chain.
"""
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .analytics import STATES
from .config import rc
from .internals import _not_none, _to_count, _to_prob, _to_state, rcsetup, warnings
from .simulator import batch_ci

__all__ = [
    'OracleConfig',
    'ChainSample',
    'stationary_power_iteration',
    'moments_truncated',
    'mixture_area',
    'chain_sample_aoii',
]

# Terms summed at once by the truncated sums
CHUNK = 1_000_000


@dataclass
class OracleConfig(object):
    """
    Settings of the brute-force verifiers. Unset fields are filled
    from the ``oracle`` `rc` category.

    Attributes
    ----------
    power_iter_tol : float
        Stop power iteration once ``||v P - v||_1`` drops below this.
    power_iter_max : int
        Maximum number of matrix squarings.
    truncation_cutoff : int or None
        Number of terms of truncated geometric sums. ``None`` selects the
        smallest cutoff whose neglected tail mass is below 1e-12.
    chain_sample_slots : int
        Number of slots simulated by `chain_sample_aoii`.
    seed : int
        Seed of the chain sampler.
    """
    power_iter_tol: float = None
    power_iter_max: int = None
    truncation_cutoff: int = None
    chain_sample_slots: int = None
    seed: int = None

    def __post_init__(self):
        self.power_iter_tol = float(_not_none(self.power_iter_tol, rc['oracle.tol']))
        if not self.power_iter_tol > 0:
            raise ValueError(f'Invalid power_iter_tol {self.power_iter_tol!r}.')
        self.power_iter_max = _to_count(
            _not_none(self.power_iter_max, rc['oracle.maxiter']), 'power_iter_max'
        )
        cutoff = _not_none(self.truncation_cutoff, rc['oracle.cutoff'])
        if cutoff is not None:
            cutoff = _to_count(cutoff, 'truncation_cutoff')
        self.truncation_cutoff = cutoff
        self.chain_sample_slots = _to_count(
            _not_none(self.chain_sample_slots, rc['oracle.slots']), 'chain_sample_slots'
        )
        self.seed = _to_count(_not_none(self.seed, rc['oracle.seed']), 'seed', 0)


@dataclass(frozen=True)
class ChainSample(object):
    """
    Estimates from a direct simulation of the joint chain.
    """
    aoii: float
    e_w: float
    p_miss: float
    slots: int
    ci95: float
    error_periods: int
    visits: int


def _check_matrix(matrix):
    """
    Return the matrix as a float array after checking it is row-stochastic.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (4, 4):
        raise ValueError(f'Invalid matrix shape {matrix.shape}. Must be (4, 4).')
    if np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=1) - 1) > 1e-12):
        raise ValueError('Invalid matrix. Rows must be nonnegative and sum to 1.')
    return matrix


def stationary_power_iteration(matrix, cfg=None):
    """
    Return the stationary distribution of a 4-state chain by power iteration.

    Parameters
    ----------
    matrix : array-like
        The 4 x 4 row-stochastic transition matrix.
    cfg : OracleConfig, optional
        The tolerances. Default is ``OracleConfig()``.

    Returns
    -------
    ndarray
        The distribution ``v`` with ``||v P - v||_1 < cfg.power_iter_tol``. The
        change between successive iterates must also drop below the tolerance.

    Raises
    ------
    ConvergenceError
        If the residual is still too large after ``cfg.power_iter_max``
        squarings. This flags reducible or periodic chains.

    Note
    ----
    The iterate is advanced by ``P``, ``P^2``, ``P^4``, and so on, which
    is still the power method but converges in logarithmically many steps
    for slowly mixing chains. No linear system is solved.
    """
    cfg = cfg or OracleConfig()
    matrix = _check_matrix(matrix)
    power = matrix.copy()
    v = np.full(4, 0.25)
    resid = np.inf
    for _ in range(cfg.power_iter_max):
        v_old = v
        v = v @ power
        v /= v.sum()
        step = np.abs(v - v_old).sum()
        resid = np.abs(v @ matrix - v).sum()
        if resid < cfg.power_iter_tol and step < cfg.power_iter_tol:
            return v
        power = power @ power
        power /= power.sum(axis=1, keepdims=True)
    raise warnings.ConvergenceError(
        f'Power iteration did not converge after {cfg.power_iter_max} squarings '
        f'(residual {resid:.3g}). The chain may be reducible or periodic.'
    )


def _auto_cutoff(p):
    """
    Return the smallest cutoff whose neglected geometric tail is below 1e-12.
    """
    if p >= 1:
        return 1
    return max(1, math.ceil(math.log(rcsetup.TAIL_MASS) / math.log1p(-p)) + 1)


def _truncated_sum(p, func, cutoff):
    """
    Return ``sum(func(k) * (1 - p)^(k - 1) * p for k = 1..cutoff)``.
    """
    total = 0.0
    for start in range(1, cutoff + 1, CHUNK):
        k = np.arange(start, min(start + CHUNK, cutoff + 1), dtype=float)
        pmf = p * (1 - p) ** (k - 1)
        total += float(np.sum(func(k) * pmf))
    return total


def _resolve_cutoff(p, cutoff):
    p = _to_prob(p, 'p')
    if p <= 0:
        raise ValueError(f'Invalid geometric parameter p = {p!r}. Must be positive.')
    cutoff = _not_none(cutoff, rc['oracle.cutoff'])
    if cutoff is None:
        cutoff = _auto_cutoff(p)
    cutoff = _to_count(cutoff, 'cutoff')
    tail = (1 - p) ** cutoff
    if tail >= rcsetup.TAIL_MASS:
        warnings._warn_aoii(
            f'Truncated geometric sum with p = {p!r} and cutoff = {cutoff} '
            f'neglects tail mass {tail:.3g}.'
        )
    return p, cutoff


def moments_truncated(p, cutoff=None):
    """
    Return the first two moments of a geometric variable on ``{1, 2, ...}``
    by truncated summation of its probability mass function.

    Parameters
    ----------
    p : float
        The success probability in (0, 1].
    cutoff : int, optional
        The number of terms. Default is :rc:`oracle.cutoff`, and if that is
        ``None``, the smallest cutoff with neglected tail mass below 1e-12.
        An `AoIIWarning` is emitted when the tail ``(1 - p)^cutoff`` is larger.

    Returns
    -------
    mean, second_moment : float
        The truncated sums of ``k`` and ``k^2``.
    """
    p, cutoff = _resolve_cutoff(p, cutoff)
    mean = _truncated_sum(p, lambda k: k, cutoff)
    second = _truncated_sum(p, lambda k: k ** 2, cutoff)
    return mean, second


def mixture_area(cycle, cutoff=None):
    """
    Return the mean area ``E[W (W + 1) / 2]`` under one error period by
    truncated summation over the mixture distribution of `cycle`.
    """
    if cycle.no_error:
        return np.nan
    total = 0.0
    for weight, p in ((cycle.c_prime, cycle.p01), (1 - cycle.c_prime, cycle.p10)):
        if weight > 0:
            p, n = _resolve_cutoff(p, cutoff)
            total += weight * _truncated_sum(p, lambda k: k * (k + 1) / 2, n)
    return total


def chain_sample_aoii(matrix, cfg=None, delivered=None, critical_state=1):
    """
    Estimate the average age of incorrect information, the mean error period,
    and the missed-detection probability by simulating the joint chain.

    Parameters
    ----------
    matrix : array-like or tuple
        The 4 x 4 transition matrix, or the ``(matrix, delivered)`` pair
        returned by ``joint_transition_matrix(..., labeled=True)``.
    cfg : OracleConfig, optional
        The slot count and seed. Default is ``OracleConfig()``.
    delivered : array-like, optional
        The delivery-labeled part of `matrix`. Required for the
        missed-detection estimate, which is NaN otherwise.
    critical_state : {0, 1}, optional
        The monitored source state.

    Returns
    -------
    ChainSample
        The estimates. The chain starts in state (0, 0). The age follows
        ``Omega_n = delta_n (Omega_{n-1} + 1)``, error periods still open
        at the end are dropped, and visits to the critical state count
        only if they start and end inside the run.
    """
    if isinstance(matrix, tuple):
        matrix, delivered = matrix
    cfg = cfg or OracleConfig()
    critical_state = _to_state(critical_state)
    matrix = _check_matrix(matrix)
    cum_rows = np.cumsum(matrix, axis=1)
    cum_rows[:, -1] = 1.0
    cum_rows = cum_rows.tolist()
    if delivered is None:
        ratio = None
    else:
        delivered = np.asarray(delivered, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(matrix > 0, delivered / matrix, 0.0).tolist()
    error = [x != x_hat for x, x_hat in STATES]
    critical = [x == critical_state for x, _ in STATES]

    # Simulate the chain in chunks of pre-drawn uniforms. Ages are summed per
    # batch as the chunks complete.
    slots = cfg.chain_sample_slots
    nbatch = min(rc['simulator.batches'], slots)
    batch_sums = np.zeros(nbatch)
    batch_slots = np.zeros(nbatch)
    total = 0
    rng = np.random.default_rng(cfg.seed)
    ages = np.empty(CHUNK, dtype=np.int64)
    state = 0
    omega = run = runs = run_sum = 0
    visits = missed = 0
    counted = notified = False  # visits in progress at slot zero are ignored
    for start in range(0, slots, CHUNK):
        n = min(CHUNK, slots - start)
        u_move = rng.random(n).tolist()
        u_hit = rng.random(n).tolist()
        for i in range(n):
            nxt = min(bisect_right(cum_rows[state], u_move[i]), 3)
            hit = ratio is not None and u_hit[i] < ratio[state][nxt]
            if error[nxt]:
                omega += 1
                run += 1
            else:
                omega = 0
                if run:
                    runs += 1
                    run_sum += run
                    run = 0
            if critical[nxt]:
                if not critical[state]:
                    counted, notified = True, hit
                else:
                    notified = notified or hit
            elif critical[state] and counted:
                visits += 1
                missed += not notified
            ages[i] = omega
            state = nxt
        index = np.arange(start, start + n) * nbatch // slots
        batch_sums += np.bincount(index, weights=ages[:n], minlength=nbatch)
        batch_slots += np.bincount(index, minlength=nbatch)
        total += int(ages[:n].sum())

    means = batch_sums / np.maximum(batch_slots, 1)
    return ChainSample(
        aoii=total / slots,
        e_w=run_sum / runs if runs else np.nan,
        p_miss=missed / visits if visits and ratio is not None else np.nan,
        slots=slots,
        ci95=batch_ci(means),
        error_periods=runs,
        visits=visits,
    )
