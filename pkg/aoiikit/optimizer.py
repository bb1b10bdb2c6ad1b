#!/usr/bin/env python3
"""
Optimal access probabilities for the random and hybrid policies.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import optimize

from .analytics import (
    analyze,
    aoii_general,
    aoii_hybrid_approx,
    aoii_symmetric,
    error_cycle,
)
from .config import rc
from .internals import _not_none, _to_count, _to_mode, _to_prob, docstring
from .sources import AccessPolicy, SourceModel, activity, success_prob

__all__ = [
    'OptResult',
    'optimal_load_root',
    'optimize_random',
    'hybrid_seed',
    'hybrid_scaling_constant',
    'random_scaling_constant',
    'optimize_hybrid',
    'tradeoff_sweep',
]

logger = logging.getLogger(__name__)

# Golden ratio constants
INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

# Bracket of the positive root of 2 (G - 1) exp(G) = G - 2
ROOT_BRACKET = (0.5, 0.7)

# Relative difference below which two objective values are tied
TIE_RTOL = 1e-13

docstring.snippets['optimizer.source'] = """
source : SourceModel
    The source model shared by all nodes.
M : int
    The number of nodes.
"""


@dataclass(frozen=True)
class OptResult(object):
    """
    The minimizer of the average age of incorrect information over
    hybrid policies.

    Attributes
    ----------
    alpha_c_star, alpha_s_star : float
        The optimal access probabilities.
    aoii_star : float
        The average age at the optimum.
    load_star : float
        The channel load at the optimum.
    collapsed_to_random : bool
        Whether both probabilities lie within :rc:`optimizer.collapse` / M of
        1 / M. At high source dynamics the exact optimum sits at
        ``alpha_c = 0`` with ``alpha_s`` close to 1 / M, which still counts
        as collapsed.
    gamma_star : float
        The success probability at the optimum.
    M : int
        The number of nodes.
    """
    alpha_c_star: float
    alpha_s_star: float
    aoii_star: float
    load_star: float
    collapsed_to_random: bool
    gamma_star: float = np.nan
    M: int = None

    @property
    def policy(self):
        return AccessPolicy(self.alpha_c_star, self.alpha_s_star)


def _load_equation(G):
    return 2 * (G - 1) * np.exp(G) - (G - 2)


def optimal_load_root(method='bisect'):
    """
    Return the positive root ``G*`` of ``2 (G - 1) exp(G) = G - 2``. This is
    the load minimizing the small ``q_bar`` approximation of the hybrid
    policy's average age with ``alpha_c = 1``.

    Parameters
    ----------
    method : {'bisect', 'secant'}, optional
        The root finder. Both start from the bracket (0.5, 0.7).

    Returns
    -------
    float
        The root, approximately 0.6438.
    """
    a, b = ROOT_BRACKET
    assert _load_equation(a) < 0 < _load_equation(b)
    if method == 'bisect':
        root = optimize.bisect(
            _load_equation, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200,
        )
    elif method == 'secant':
        root = optimize.newton(_load_equation, a, x1=b, tol=1e-14, maxiter=100)
    else:
        raise ValueError(f'Invalid method {method!r}. Options are bisect, secant.')
    return float(root)


def optimize_random(M):
    """
    Return the access probability ``1 / M`` of the random policy. This
    maximizes the throughput, and the average age decreases with it.
    """
    return 1 / _to_count(M, 'M')


@docstring.add_snippets
def hybrid_seed(source, M, g_star=None):
    """
    Return the value of ``alpha_s`` that brings the hybrid policy with
    ``alpha_c = 1`` to the load ``G*``.

    Parameters
    ----------
    %(optimizer.source)s
    g_star : float, optional
        The target load. Default is `optimal_load_root`.

    Returns
    -------
    float
        ``(G* / M - q_bar) / (1 - q_bar)``, clamped to 0 when the state changes
        alone exceed the target load.
    """
    M = _to_count(M, 'M')
    if isinstance(source, SourceModel):
        q_bar = source.q_bar
    else:
        q_bar = _to_prob(source, 'q_bar')
    g_star = _not_none(g_star, optimal_load_root())
    if q_bar >= 1 or q_bar * M >= g_star:
        return 0.0
    return min(1.0, (g_star / M - q_bar) / (1 - q_bar))


def hybrid_scaling_constant(alpha_c=1.0):
    """
    Return the constant ``c`` in ``aoii ~ c q_bar M^2`` for the hybrid policy
    at the load ``G*``, from the small ``q_bar`` approximation. This is
    about 4.15 for ``alpha_c = 1``.
    """
    return aoii_hybrid_approx(1.0, 1, optimal_load_root(), alpha_c)


def random_scaling_constant():
    """
    Return the constant ``e^2`` in ``aoii ~ e^2 q_bar M^2`` for the
    random policy with ``alpha = 1 / M``.
    """
    return math.e ** 2


def _objective(source, M, mode):
    """
    Return the exact average age as a function of the two access probabilities.
    """
    def func(alpha_c, alpha_s):
        policy = AccessPolicy(alpha_c, alpha_s)
        gamma = success_prob(M, activity(source, policy), mode)
        if source.is_symmetric:
            return aoii_symmetric(source.q01, M, policy, gamma)
        return aoii_general(error_cycle(source, policy, gamma))
    return func


def _default_grid(M):
    """
    Return the coarse search grid, linear near zero and logarithmic above.
    """
    span = min(1.0, rc['optimizer.span'] / M)
    parts = [[0.0, 1.0 / M, 1.0], np.linspace(0, span, rc['optimizer.linpoints'])]
    if span < 1:
        parts.append(np.geomspace(span, 1, rc['optimizer.logpoints']))
    return np.unique(np.clip(np.concatenate(parts), 0, 1))


def _is_better(value, point, best_value, best_point):
    """
    Compare two candidates. Ties go to larger ``alpha_c``, then smaller ``alpha_s``.
    """
    tol = TIE_RTOL * max(abs(best_value), 1e-300)
    if value < best_value - tol:
        return True
    if value <= best_value + tol:
        return (point[0], -point[1]) > (best_point[0], -best_point[1])
    return False


def _golden_section(func, a, b, tol):
    """
    Golden-section search. Given a function with a single local minimum
    in the interval [a, b], return a subinterval [c, d] that contains the
    minimum with ``d - c <= tol``.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return a, b

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = func(c)
    yd = func(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = func(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = func(d)

    if yc < yd:
        return a, d
    else:
        return c, b


def _neighbors(grid, value):
    """
    Return the grid points on either side of `value`.
    """
    below = grid[grid < value]
    above = grid[grid > value]
    lo = below.max() if below.size else value
    hi = above.min() if above.size else value
    return lo, hi


@docstring.add_snippets
def optimize_hybrid(source, M, grid=None, mode=None):
    """
    Minimize the exact average age of incorrect information over the
    access probabilities ``(alpha_c, alpha_s)``.

    Parameters
    ----------
    %(optimizer.source)s
    grid : array-like, optional
        The coarse grid of candidate values for each probability. Default
        mixes :rc:`optimizer.linpoints` linear points in ``[0, span / M]`` with
        :rc:`optimizer.logpoints` logarithmic points in ``[span / M, 1]``, where
        ``span`` is :rc:`optimizer.span`.
    mode : {'exact', 'exponential'}, optional
        The success probability model. Default is :rc:`gamma.mode`.

    Returns
    -------
    OptResult
        The optimum.

    Note
    ----
    The grid minimum is compared with the random policy ``alpha = 1 / M``,
    the reactive policy, and ``alpha_c = 1`` with `hybrid_seed`, then refined
    one coordinate at a time by golden-section search between neighboring
    grid points down to :rc:`optimizer.tol`. Refinements are kept only when
    they strictly improve the objective, so the result is never worse than
    either pure policy.
    With a single node the objective does not depend on ``alpha_s``, so ties
    resolve to the reactive policy ``(1, 0)``.
    """
    if not isinstance(source, SourceModel):
        raise ValueError(f'Invalid source {source!r}. Must be a SourceModel.')
    M = _to_count(M, 'M')
    mode = _to_mode(mode)
    func = _objective(source, M, mode)
    if grid is None:
        grid = _default_grid(M)
    else:
        grid = np.unique(np.clip(np.asarray(grid, dtype=float).ravel(), 0, 1))
        if grid.size < 2:
            raise ValueError(f'Invalid grid {grid!r}. Need at least two points.')

    # Coarse stage
    candidates = [(1.0 / M, 1.0 / M), (1.0, 0.0), (1.0, hybrid_seed(source, M))]
    candidates.extend((ac, as_) for ac in grid for as_ in grid)
    best_point, best_value = candidates[0], func(*candidates[0])
    for point in candidates[1:]:
        value = func(*point)
        if _is_better(value, point, best_value, best_point):
            best_point, best_value = point, value
    logger.debug('Grid optimum %s with aoii %.6g.', best_point, best_value)

    # Refinement stage
    tol = rc['optimizer.tol']
    point = list(best_point)
    for _ in range(rc['optimizer.rounds']):
        moved = False
        for axis in (1, 0):
            lo, hi = _neighbors(grid, point[axis])
            if hi - lo <= tol:
                continue

            def line(t, axis=axis):
                trial = list(point)
                trial[axis] = t
                return func(*trial)

            c, d = _golden_section(line, lo, hi, tol)
            trial = list(point)
            trial[axis] = 0.5 * (c + d)
            value = func(*trial)
            if value < best_value - TIE_RTOL * abs(best_value):
                point, best_value, moved = trial, value, True
        if not moved:
            break

    # Final result evaluated at the returned point
    alpha_c, alpha_s = point
    policy = AccessPolicy(alpha_c, alpha_s)
    rho = activity(source, policy)
    collapse = rc['optimizer.collapse'] / M
    return OptResult(
        alpha_c_star=alpha_c,
        alpha_s_star=alpha_s,
        aoii_star=func(alpha_c, alpha_s),
        load_star=rho * M,
        collapsed_to_random=bool(
            M > 1
            and abs(alpha_c - 1 / M) <= collapse
            and abs(alpha_s - 1 / M) <= collapse
        ),
        gamma_star=success_prob(M, rho, mode),
        M=M,
    )


@docstring.add_snippets
def tradeoff_sweep(
    source, M, alpha_s_range=None, points=31, alpha_c=1.0, mode=None, critical_state=1,
):
    """
    Evaluate the closed forms along a sweep of ``alpha_s`` at fixed ``alpha_c``.

    Parameters
    ----------
    %(optimizer.source)s
    alpha_s_range : 2-tuple of float, optional
        The sweep interval. Default is ``(0, 3 / M)``.
    points : int, optional
        The number of evenly spaced sweep points.
    alpha_c : float, optional
        The access probability on state changes. Default is ``1``.
    mode : {'exact', 'exponential'}, optional
        The success probability model. Default is :rc:`gamma.mode`.
    critical_state : {0, 1}, optional
        The monitored state for the missed-detection probability.

    Returns
    -------
    pandas.DataFrame
        One row per sweep point with columns ``alpha_s``, ``alpha_c``,
        ``gamma``, ``load_G``, ``aoii``, ``p_miss``, ``e_w``, and ``e_y``,
        sorted by increasing ``alpha_s``.
    """
    M = _to_count(M, 'M')
    points = _to_count(points, 'points')
    lo, hi = _not_none(alpha_s_range, (0.0, min(1.0, 3 / M)))
    lo, hi = _to_prob(lo, 'alpha_s_range'), _to_prob(hi, 'alpha_s_range')
    if lo > hi:
        raise ValueError(f'Invalid alpha_s_range {(lo, hi)!r}. Must be increasing.')
    records = []
    for alpha_s in np.linspace(lo, hi, points):
        policy = AccessPolicy(alpha_c, alpha_s)
        report = analyze(source, policy, M, mode, critical_state)
        records.append({
            'alpha_s': report.policy.alpha_s,
            'alpha_c': report.policy.alpha_c,
            'gamma': report.channel.gamma,
            'load_G': report.channel.load_G,
            'aoii': report.aoii,
            'p_miss': report.p_miss,
            'e_w': report.cycle.e_w,
            'e_y': report.cycle.e_y,
        })
    return pd.DataFrame.from_records(records)
