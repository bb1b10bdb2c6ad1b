#!/usr/bin/env python3
"""
Slot-accurate Monte-Carlo simulation of nodes monitoring independent Markov
sources over a collision channel without feedback.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .config import rc
from .internals import _not_none, _to_count, _to_state, timers, warnings
from .sources import AccessPolicy, SourceModel

__all__ = [
    'SimConfig',
    'NodeState',
    'SimMetrics',
    'run',
    'batch_ci',
    'aoii_recursion',
]

logger = logging.getLogger(__name__)

# Event slot that is never reached
NEVER = 2 ** 62


@dataclass(frozen=True)
class SimConfig(object):
    """
    Settings of one simulation run.

    Parameters
    ----------
    M : int
        The number of nodes.
    source : SourceModel
        The source model shared by all nodes. Node paths are independent.
    policy : AccessPolicy
        The channel access policy shared by all nodes.
    horizon : int
        The total number of simulated slots, warmup included.
    warmup : int, optional
        The number of initial slots excluded from the metrics. Default is
        :rc:`simulator.warmup`, and if that is ``None``, ``max(10000, 10 / q_bar)``.
    seed : int, optional
        The master seed. Default is ``0``.
    critical_state : {0, 1}, optional
        The monitored source state for missed detections. Default is ``1``.
    """
    M: int
    source: SourceModel
    policy: AccessPolicy
    horizon: int
    warmup: int = None
    seed: int = 0
    critical_state: int = 1

    def __post_init__(self):
        if not isinstance(self.source, SourceModel):
            raise ValueError(f'Invalid source {self.source!r}. Must be a SourceModel.')
        if not isinstance(self.policy, AccessPolicy):
            raise ValueError(
                f'Invalid policy {self.policy!r}. Must be an AccessPolicy.'
            )
        object.__setattr__(self, 'M', _to_count(self.M, 'M'))
        object.__setattr__(self, 'horizon', _to_count(self.horizon, 'horizon'))
        object.__setattr__(self, 'seed', _to_count(self.seed, 'seed', 0))
        object.__setattr__(self, 'critical_state', _to_state(self.critical_state))
        if self.warmup is not None:
            object.__setattr__(self, 'warmup', _to_count(self.warmup, 'warmup', 0))
        if self.horizon > rc['simulator.maxhorizon']:
            raise ValueError(
                f'Horizon {self.horizon} exceeds the limit of '
                f"{rc['simulator.maxhorizon']} slots (rc['simulator.maxhorizon'])."
            )
        if self.M > rc['simulator.maxcells']:
            raise ValueError(
                f'Cannot hold {self.M} nodes in memory with '
                f"rc['simulator.maxcells'] = {rc['simulator.maxcells']}."
            )
        self.resolved_warmup()

    def resolved_warmup(self):
        """
        Return the number of warmup slots.
        """
        warmup = _not_none(self.warmup, rc['simulator.warmup'])
        if warmup is None:
            warmup = max(10_000, 10 / self.source.q_bar)
        warmup = int(math.ceil(warmup))
        if warmup >= self.horizon:
            raise ValueError(
                f'Horizon {self.horizon} must exceed the warmup of {warmup} slots.'
            )
        return warmup


@dataclass
class NodeState(object):
    """
    The per-node state carried from one block of slots to the next. Every
    array field has one entry per node.

    Attributes
    ----------
    x, x_hat : ndarray
        The source state and the receiver estimate.
    error_start, correct_start : ndarray
        The first slots of the current error and correct periods.
    visit_start, last_delivery : ndarray
        The slots of the last entry into the critical state and of the last
        delivery. ``-1`` stands for an unknown slot before the first one.
    slot : int
        The last slot processed.
    critical_state : {0, 1}
        The monitored source state.
    """
    x: np.ndarray
    x_hat: np.ndarray
    error_start: np.ndarray
    correct_start: np.ndarray
    visit_start: np.ndarray
    last_delivery: np.ndarray
    slot: int = -1
    critical_state: int = 1

    @classmethod
    def initial(cls, x, critical_state=1):
        """
        Return the state before the first slot. Estimates are correct
        and the periods in progress have unknown start slots.
        """
        x = np.asarray(x, dtype=np.int8)
        n = x.size
        return cls(
            x=x.copy(),
            x_hat=x.copy(),
            error_start=np.zeros(n, dtype=np.int64),
            correct_start=np.full(n, -1, dtype=np.int64),
            visit_start=np.full(n, -1, dtype=np.int64),
            last_delivery=np.full(n, -1, dtype=np.int64),
            critical_state=critical_state,
        )

    @property
    def aoii(self):
        """
        The age of incorrect information in the last slot. This is zero when
        ``x == x_hat`` and at least one otherwise.
        """
        return np.where(self.x != self.x_hat, self.slot - self.error_start + 1, 0)

    @property
    def error_run(self):
        """
        The length of the current error period, zero if the estimate is correct.
        """
        return self.aoii

    @property
    def correct_run(self):
        """
        The length of the current correct period, zero during an error.
        """
        return np.where(self.x == self.x_hat, self.slot - self.correct_start + 1, 0)

    @property
    def visit_active(self):
        """
        Whether the source is in the critical state.
        """
        return self.x == self.critical_state

    @property
    def visit_notified(self):
        """
        Whether a delivery took place since the current visit started.
        """
        return self.visit_active & (self.last_delivery >= self.visit_start)


@dataclass(frozen=True)
class SimMetrics(object):
    """
    Empirical metrics pooled over all nodes and all measured slots.

    Attributes
    ----------
    aoii_mean : float
        The time-average age of incorrect information.
    p_miss : float
        The fraction of completed critical-state visits without a delivery.
    visits : int
        The number of completed critical-state visits.
    e_w, e_w2, e_y : float
        Moments of the completed error and correct periods.
    realized_load, realized_throughput : float
        Transmitted and delivered packets per slot.
    realized_gamma : float
        The fraction of transmitted packets that were delivered.
    collisions : int
        The number of slots with two or more transmitters.
    ci95_aoii : float
        The batch-means 95% confidence half-width of `aoii_mean`.
    slots, warmup : int
        The numbers of measured and discarded slots.
    batches : int
        The number of batch means behind `ci95_aoii`.
    error_periods, correct_periods : int
        The numbers of completed periods behind `e_w` and `e_y`.
    transmissions, successes : int
        The numbers of transmitted packets and delivering slots.
    aoii_from_periods : float
        The area of the completed error periods per node and measured slot.
    """
    aoii_mean: float
    p_miss: float
    visits: int
    e_w: float
    e_w2: float
    e_y: float
    realized_load: float
    realized_throughput: float
    realized_gamma: float
    collisions: int
    ci95_aoii: float
    slots: int
    warmup: int
    batches: int
    error_periods: int
    correct_periods: int
    transmissions: int
    successes: int
    aoii_from_periods: float


def _run_lengths(flag, carry):
    """
    Return the length of the current run of ``True`` values in each slot.
    The rows of `flag` are nodes and `carry` holds the lengths before the
    first column.
    """
    cols = np.arange(flag.shape[1])
    last_false = np.maximum.accumulate(np.where(flag, -1, cols), axis=1)
    return np.where(last_false >= 0, cols - last_false, carry[:, None] + cols + 1)


def aoii_recursion(delta, aoii=0):
    """
    Return the age of incorrect information ``Omega_n = delta_n (Omega_{n-1} + 1)``
    for a sequence of error flags.

    Parameters
    ----------
    delta : array-like of bool
        The error flags. Two-dimensional input holds one node per row.
    aoii : int or array-like, optional
        The age before the first slot.

    Returns
    -------
    ndarray
        The age in each slot, with the shape of `delta`.
    """
    delta = np.asarray(delta, dtype=bool)
    flat = delta.ndim == 1
    delta = np.atleast_2d(delta)
    carry = np.broadcast_to(np.asarray(aoii, dtype=np.int64), delta.shape[:1])
    omega = _run_lengths(delta, carry)
    return omega[0] if flat else omega


def _geometric_gaps(u, p):
    """
    Return the gaps between successive successes of independent Bernoulli
    trials with probability `p`, one uniform per gap. Gaps are infinite
    for ``p = 0``.
    """
    p = np.broadcast_to(np.asarray(p, dtype=float), np.shape(u))
    with np.errstate(divide='ignore', invalid='ignore'):
        gaps = 1 + np.floor(np.log1p(-u) / np.log1p(-p))
    gaps = np.where(p >= 1, 1.0, gaps)
    return np.where(p <= 0, np.inf, gaps)


class _Stream(object):
    """
    Upcoming event slots of one node drawn ahead from its own generator.
    Every event consumes the same number of uniforms in slot order, so the
    sample path does not depend on how the horizon is cut into blocks.

    With `alpha` set, the events are source transitions that alternate
    between leaving state 0 and state 1, and each carries a transmit
    decision drawn with probability `alpha`.
    """
    def __init__(self, gen, probs, chunk, state=0, alpha=None):
        self.gen = gen
        self.probs = np.asarray(probs, dtype=float)
        self.chunk = max(1, int(chunk))
        self.state = int(state)
        self.alpha = alpha
        self.last = -1
        self.slots = np.empty(0, dtype=np.int64)
        self.sends = np.empty(0, dtype=bool)

    def _refill(self):
        k = self.chunk
        if self.alpha is None:
            u = self.gen.random(k)
            probs = self.probs[0]
            sends = np.zeros(k, dtype=bool)
        else:
            u = self.gen.random((k, 2))
            probs = self.probs[self.state ^ (np.arange(k) & 1)]
            sends = u[:, 1] < self.alpha
            u = u[:, 0]
            self.state ^= k & 1
        slots = self.last + np.cumsum(_geometric_gaps(u, probs))
        slots = np.minimum(slots, NEVER).astype(np.int64)
        self.last = int(slots[-1])
        self.slots = np.concatenate((self.slots, slots))
        self.sends = np.concatenate((self.sends, sends))

    def peek(self):
        """
        Return the next event slot.
        """
        if not self.slots.size:
            self._refill()
        return self.slots[0]

    def take(self, stop):
        """
        Remove and return the events before slot `stop`.
        """
        while not self.slots.size or self.slots[-1] < stop:
            self._refill()
        k = int(np.searchsorted(self.slots, stop))
        slots, sends = self.slots[:k], self.sends[:k]
        self.slots, self.sends = self.slots[k:], self.sends[k:]
        return slots, sends


class _NodeStreams(object):
    """
    The source and transmission streams of every node. Each node gets two
    Philox generators spawned from its child of the master seed sequence.
    """
    def __init__(self, cfg, block):
        source, policy = cfg.source, cfg.policy
        chunk_source = 1.25 * source.q_bar * block + 4
        chunk_send = 1.25 * policy.alpha_s * block + 4
        self.x0 = np.empty(cfg.M, dtype=np.int8)
        self.sources, self.sends = [], []
        for i, seq in enumerate(np.random.SeedSequence(cfg.seed).spawn(cfg.M)):
            gen_source, gen_send = (
                np.random.Generator(np.random.Philox(child)) for child in seq.spawn(2)
            )
            self.x0[i] = gen_source.random() < source.pi1
            self.sources.append(
                _Stream(
                    gen_source, (source.q01, source.q10), chunk_source,
                    state=self.x0[i], alpha=policy.alpha_c,
                )
            )
            self.sends.append(_Stream(gen_send, (policy.alpha_s,), chunk_send))
        self.heads = np.array([self._head(i) for i in range(cfg.M)], dtype=np.int64)

    def _head(self, i):
        return min(self.sources[i].peek(), self.sends[i].peek())

    def take(self, stop):
        """
        Return the transitions ``(node, slot, send)`` and the spontaneous
        transmissions ``(node, slot)`` before slot `stop`.
        """
        tr_node, tr_slot, tr_send, tx_node, tx_slot = [], [], [], [], []
        for i in np.flatnonzero(self.heads < stop):
            slots, sends = self.sources[i].take(stop)
            tr_node.append(np.full(slots.size, i, dtype=np.int64))
            tr_slot.append(slots)
            tr_send.append(sends)
            slots, _ = self.sends[i].take(stop)
            tx_node.append(np.full(slots.size, i, dtype=np.int64))
            tx_slot.append(slots)
            self.heads[i] = self._head(i)
        empty = np.empty(0, dtype=np.int64)
        return (
            (
                np.concatenate(tr_node or [empty]),
                np.concatenate(tr_slot or [empty]),
                np.concatenate(tr_send or [empty]).astype(bool),
            ),
            (np.concatenate(tx_node or [empty]), np.concatenate(tx_slot or [empty])),
        )


def _blocks(horizon, warmup, nbatch, block):
    """
    Yield ``(start, stop, batch)`` slot ranges of at most `block` slots that
    do not straddle the warmup end or a batch boundary. `batch` is ``None``
    during the warmup.
    """
    length = horizon - warmup
    edges = [0, *(warmup + (b * length + nbatch - 1) // nbatch for b in range(nbatch))]
    edges.append(horizon)
    for b, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        for start in range(lo, hi, block):
            yield start, min(start + block, hi), b - 1 if b else None


def _fill(mask, first, values, carry):
    """
    Return `values` at the latest `mask` event of the same node, or `carry`
    before the first one. Events are sorted by node and `first` marks the
    first event of each node.
    """
    index = np.arange(mask.size)
    last = np.maximum.accumulate(np.where(mask | first, index, 0))
    return np.where(mask[last], values[last], carry)


def _area(start, stop, origin):
    """
    Return the summed age over slots ``start <= n < stop`` of error periods
    that began at `origin`.
    """
    count = stop - start
    return int(np.sum(count * (start - origin + 1) + count * (count - 1) // 2))


class _Accumulator(object):
    """
    Streaming sums of one simulation run.
    """
    def __init__(self, nbatch):
        self.aoii = 0
        self.transmissions = 0
        self.successes = 0
        self.collisions = 0
        self.w_count = 0
        self.w_sum = 0
        self.w2_sum = 0
        self.y_count = 0
        self.y_sum = 0
        self.visits = 0
        self.missed = 0
        self.batch_sums = np.zeros(nbatch)
        self.batch_slots = np.zeros(nbatch)


def _advance(state, streams, start, stop, batch, warmup, acc):
    """
    Advance all nodes through the slots ``start <= n < stop`` and update the
    accumulators. Only slots with a transition or a transmission are visited.
    """
    nslots = stop - start
    (tr_node, tr_slot, tr_send), (tx_node, tx_slot) = streams.take(stop)

    # (2) transmit decisions: alpha_c in transition slots, alpha_s elsewhere
    keys = tr_node * nslots + (tr_slot - start)
    spont = ~np.isin(tx_node * nslots + (tx_slot - start), keys)
    tx_node, tx_slot = tx_node[spont], tx_slot[spont]
    sent = np.concatenate((tx_slot, tr_slot[tr_send])) - start

    # (3) collision resolution
    count = np.bincount(sent, minlength=nslots)
    single = count == 1
    if batch is not None:
        acc.transmissions += sent.size
        acc.successes += int(single.sum())
        acc.collisions += int((count >= 2).sum())

    # Events sorted by node then slot. A delivery in a transition slot
    # follows the transition.
    got = single[tx_slot - start]
    ngot = int(got.sum())
    node = np.concatenate((tr_node, tx_node[got]))
    slot = np.concatenate((tr_slot, tx_slot[got]))
    flip = np.concatenate((np.ones(tr_node.size, bool), np.zeros(ngot, bool)))
    deliver = np.concatenate((tr_send & single[tr_slot - start], np.ones(ngot, bool)))
    order = np.lexsort((slot, node))
    node, slot, flip, deliver = node[order], slot[order], flip[order], deliver[order]
    first = np.ones(node.size, dtype=bool)
    first[1:] = node[1:] != node[:-1]
    last = np.ones(node.size, dtype=bool)
    last[:-1] = first[1:]

    # (4) states, estimates, and error flags after each event
    flips = np.cumsum(flip)
    head = np.maximum.accumulate(np.where(first, np.arange(node.size), 0))
    parity = (flips - flips[head] + flip[head]) & 1
    x = (state.x[node] ^ parity).astype(np.int8)
    x_hat = _fill(deliver, first, x, state.x_hat[node]).astype(np.int8)
    delta = x != x_hat
    delta_prev = np.where(first, (state.x != state.x_hat)[node], np.roll(delta, 1))
    on = delta & ~delta_prev
    off = ~delta & delta_prev
    error_start = _fill(on, first, slot, state.error_start[node])
    correct_start = _fill(off, first, slot, state.correct_start[node])

    # Periods are counted when they close and started after the warmup
    keep = off & (error_start >= warmup)
    lengths = slot[keep] - error_start[keep]
    acc.w_count += lengths.size
    acc.w_sum += int(lengths.sum())
    acc.w2_sum += int(np.sum(lengths * lengths))
    keep = on & (correct_start >= warmup)
    acc.y_count += int(keep.sum())
    acc.y_sum += int(np.sum(slot[keep] - correct_start[keep]))

    # Ages over the error stretches between events
    if batch is not None:
        ahead = np.full(state.x.size, stop, dtype=np.int64)
        ahead[node[first]] = slot[first]
        wrong = state.x != state.x_hat
        ends = np.where(last, stop, np.roll(slot, -1))
        total = _area(start, ahead[wrong], state.error_start[wrong])
        total += _area(slot[delta], ends[delta], error_start[delta])
        acc.aoii += total
        acc.batch_sums[batch] += total
        acc.batch_slots[batch] += nslots

    # Visits to the critical state
    critical = state.critical_state
    visit_start = _fill(flip & (x == critical), first, slot, state.visit_start[node])
    delivered = _fill(deliver, first, slot, state.last_delivery[node])
    before = np.where(first, state.last_delivery[node], np.roll(delivered, 1))
    counted = flip & (x != critical) & (visit_start >= warmup)
    acc.visits += int(counted.sum())
    acc.missed += int((counted & (before < visit_start)).sum())

    # Carry the state into the next block
    nodes = node[last]
    state.x[nodes] = x[last]
    state.x_hat[nodes] = x_hat[last]
    state.error_start[nodes] = error_start[last]
    state.correct_start[nodes] = correct_start[last]
    state.visit_start[nodes] = visit_start[last]
    state.last_delivery[nodes] = delivered[last]
    state.slot = stop - 1
    return state


def run(cfg):
    """
    Simulate `cfg.M` nodes on a collision channel slot by slot.

    Parameters
    ----------
    cfg : SimConfig
        The run settings.

    Returns
    -------
    SimMetrics
        The metrics pooled over all nodes and all slots after the warmup.

    Note
    ----
    Within each slot every source moves first, then each node transmits with
    probability ``alpha_c`` if its source changed state and ``alpha_s``
    otherwise. A packet is delivered only if it is the sole transmission in
    the slot, and a delivery sets the estimate to the current state.

    Source sojourns and the gaps between ``alpha_s`` transmissions are drawn
    as geometric variables from two Philox streams per node spawned from the
    master seed. Only slots holding a transition or a transmission are
    visited, so the cost grows with the number of events rather than with
    ``M`` times the horizon. Slots are handled in blocks of at most
    :rc:`simulator.block` slots, and a given seed yields the same path for
    any block size.
    """
    if not isinstance(cfg, SimConfig):
        raise ValueError(f'Invalid config {cfg!r}. Must be a SimConfig.')
    M, horizon = cfg.M, cfg.horizon
    warmup = cfg.resolved_warmup()
    rate = max(1.0, M * (cfg.policy.alpha_s + cfg.source.q_bar))
    block = min(rc['simulator.block'], max(1, int(rc['simulator.maxcells'] / rate)))
    nbatch = min(rc['simulator.batches'], horizon - warmup)
    streams = _NodeStreams(cfg, block)
    state = NodeState.initial(streams.x0, cfg.critical_state)
    acc = _Accumulator(nbatch)
    logger.info(
        'Simulating M=%d nodes for %d slots (warmup %d, block %d).',
        M, horizon, warmup, block,
    )
    with timers._benchmark('simulation') as timer:
        for start, stop, batch in _blocks(horizon, warmup, nbatch, block):
            state = _advance(state, streams, start, stop, batch, warmup, acc)
    logger.debug('Simulated %d node slots in %.2fs.', M * horizon, timer.elapsed)

    # Final metrics
    slots = horizon - warmup
    norm = M * slots
    means = acc.batch_sums / (M * np.maximum(acc.batch_slots, 1))
    return SimMetrics(
        aoii_mean=acc.aoii / norm,
        p_miss=acc.missed / acc.visits if acc.visits else np.nan,
        visits=acc.visits,
        e_w=acc.w_sum / acc.w_count if acc.w_count else np.nan,
        e_w2=acc.w2_sum / acc.w_count if acc.w_count else np.nan,
        e_y=acc.y_sum / acc.y_count if acc.y_count else np.nan,
        realized_load=acc.transmissions / slots,
        realized_throughput=acc.successes / slots,
        realized_gamma=(
            acc.successes / acc.transmissions if acc.transmissions else np.nan
        ),
        collisions=acc.collisions,
        ci95_aoii=batch_ci(means),
        slots=slots,
        warmup=warmup,
        batches=nbatch,
        error_periods=acc.w_count,
        correct_periods=acc.y_count,
        transmissions=acc.transmissions,
        successes=acc.successes,
        aoii_from_periods=(acc.w_sum + acc.w2_sum) / 2 / norm,
    )


def batch_ci(samples):
    """
    Return the 95% confidence half-width of the mean of non-overlapping batch
    means using the normal approximation.

    Parameters
    ----------
    samples : array-like
        The batch means.

    Returns
    -------
    float
        ``z_0.975 * s / sqrt(k)`` for `k` batches with sample standard deviation
        `s`. NaN with an `AoIIWarning` if there are fewer than
        :rc:`simulator.minbatches` batches.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    k = samples.size
    if k < rc['simulator.minbatches'] or k < 2:
        warnings._warn_aoii(
            f'Only {k} batch means available. At least '
            f"{rc['simulator.minbatches']} are needed for a confidence interval."
        )
        return np.nan
    return float(stats.norm.ppf(0.975) * samples.std(ddof=1) / np.sqrt(k))
