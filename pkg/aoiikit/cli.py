#!/usr/bin/env python3
"""
The command line front end. Scenario files declare the nodes, the source,
the policies, and an optional sweep, and each subcommand writes one CSV
record per sweep point and policy plus a JSON sidecar.
"""
import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .analytics import analyze
from .config import parse_settings_file, rc
from .internals import GAMMA_MODES, _not_none, _to_count, _to_state
from .optimizer import optimize_hybrid, optimize_random
from .simulator import SimConfig, run
from .sources import AccessPolicy, SourceModel

__all__ = [
    'ScenarioFile',
    'cmd_analyze',
    'cmd_simulate',
    'cmd_optimize',
    'main',
]

logger = logging.getLogger(__name__)

# Bump whenever columns are added, removed, or reordered
SCHEMA_VERSION = 1

POLICIES = ('reactive', 'random', 'hybrid')
SWEEP_VARIABLES = ('q_bar_M', 'alpha_s', 'alpha')
OPTIMAL = 'optimal'

SCENARIO_KEYS = (
    'M', 'q01', 'q10', 'q_bar', 'q_bar_M', 'eta', 'policy',
    'alpha', 'alpha_c', 'alpha_s', 'horizon', 'warmup', 'seed',
    'critical_state', 'gamma_mode', 'tolerance',
    'sweep.variable', 'sweep.from', 'sweep.to', 'sweep.points', 'sweep.log',
)

ANALYZE_COLUMNS = (
    'index', 'policy', 'M', 'q01', 'q10', 'q_bar', 'eta', 'critical_state',
    'gamma_mode', 'q_bar_M', 'alpha_c', 'alpha_s', 'gamma', 'load_G',
    'throughput_S', 'aoii', 'p_miss', 'e_w', 'e_y',
)
SIMULATE_COLUMNS = ANALYZE_COLUMNS + (
    'horizon', 'warmup', 'seed', 'sim_aoii', 'sim_ci95', 'sim_p_miss',
    'sim_visits', 'sim_e_w', 'sim_e_y', 'sim_load_G', 'sim_throughput_S',
    'sim_gamma', 'sim_collisions', 'check_ok',
)
CHECKED = ('aoii', 'p_miss', 'e_w', 'e_y')  # compared with the sim_ columns
OPTIMIZE_COLUMNS = (
    'index', 'M', 'q01', 'q10', 'q_bar', 'eta', 'gamma_mode', 'q_bar_M',
    'alpha_c_star', 'alpha_s_star', 'aoii_star', 'load_star',
    'collapsed_to_random', 'gamma_star', 'aoii_reactive', 'aoii_random',
)

CONVERSIONS = {
    'q_bar': '2 * q01 * q10 / (q01 + q10)',
    'eta': 'q01 / q10',
    'q10': 'q_bar * (1 + eta) / (2 * eta)',
    'q01': 'eta * q10',
    'q_bar_M': 'q_bar * M',
    'load_G': 'M * (q_bar * alpha_c + (1 - q_bar) * alpha_s)',
    'throughput_S': 'load_G * gamma',
}


def _fail(key, message, path=None):
    prefix = f'{path}: ' if path else ''
    raise ValueError(f'{prefix}Invalid scenario key {key!r}. {message}')


def _options(value, options):
    return f'Got {value!r}. Options are: {", ".join(options)}.'


@dataclass
class ScenarioFile(object):
    """
    A resolved scenario. Use `ScenarioFile.from_file` to read one from a
    ``key: value`` text file with the same syntax as the ``.aoiikitrc`` files.

    Attributes
    ----------
    M : int
        The number of nodes.
    q01, q10 : float, optional
        The source transition probabilities. Mutually exclusive with
        `q_bar` and `q_bar_M`.
    q_bar, q_bar_M : float, optional
        The average transition probability, or that times `M`. Combined
        with `eta` through `SourceModel.from_rate`.
    eta : float
        The asymmetry ratio ``q01 / q10`` used with `q_bar` and `q_bar_M`.
    policies : tuple of str
        The evaluated policy families.
    alpha, alpha_c, alpha_s : float or ``'optimal'``
        The access probabilities. ``'optimal'`` selects ``1 / M`` for the
        random policy and `optimize_hybrid` for the hybrid policy.
    horizon, warmup : int, optional
        The simulated slots, required by ``simulate``.
    seed : int
        The master seed.
    critical_state : {0, 1}
        The monitored state for missed detections.
    gamma_mode : {'exact', 'exponential'}
        The success probability model of the closed forms.
    tolerance : float
        The relative deviation accepted by ``simulate --check``.
    sweep_variable : {'q_bar_M', 'alpha_s', 'alpha'}, optional
        The swept quantity. Without it the scenario is a single point.
    sweep_from, sweep_to, sweep_points, sweep_log
        The sweep interval, number of points, and spacing.
    path : str, optional
        The file the scenario was read from, used in error messages.
    """
    M: int
    q01: float = None
    q10: float = None
    q_bar: float = None
    q_bar_M: float = None
    eta: float = 1.0
    policies: tuple = POLICIES
    alpha: object = OPTIMAL
    alpha_c: object = OPTIMAL
    alpha_s: object = OPTIMAL
    horizon: int = None
    warmup: int = None
    seed: int = 0
    critical_state: int = 1
    gamma_mode: str = None
    tolerance: float = None
    sweep_variable: str = None
    sweep_from: float = None
    sweep_to: float = None
    sweep_points: int = 1
    sweep_log: bool = False
    path: str = field(default=None, compare=False)

    def __post_init__(self):
        self._check()

    @classmethod
    def from_file(cls, path):
        """
        Read a scenario file. Illegal lines, duplicate keys, unknown keys,
        and invalid values raise `ValueError` naming the key.
        """
        return cls.from_dict(parse_settings_file(path, strict=True), path=path)

    @classmethod
    def from_dict(cls, settings, path=None):
        """
        Build a scenario from a dictionary of scenario keys.
        """
        settings = dict(settings)
        for key in settings:
            if key not in SCENARIO_KEYS:
                _fail(key, f'Options are: {", ".join(SCENARIO_KEYS)}.', path)
        if 'M' not in settings:
            _fail('M', 'The number of nodes is required.', path)
        kw = {key.replace('.', '_'): value for key, value in settings.items()}
        policies = kw.pop('policy', None)
        if policies is not None:
            if not isinstance(policies, str):
                _fail('policy', _options(policies, POLICIES), path)
            kw['policies'] = tuple(p.strip() for p in policies.split(',') if p.strip())
        return cls(path=path, **kw)

    def _check(self):
        path = self.path

        def _number(key, value, minimum=None, integer=False, positive=False):
            try:
                if integer:
                    value = _to_count(value, key, minimum or 0)
                elif isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError(f'Got {value!r}. Must be a number.')
                else:
                    value = float(value)
                    if not np.isfinite(value) or value < 0 or positive and value <= 0:
                        raise ValueError(
                            f'Got {value!r}. Must be nonnegative and finite.'
                        )
            except ValueError as err:
                _fail(key, str(err), path)
            return value

        self.M = _number('M', self.M, minimum=1, integer=True)
        self.seed = _number('seed', self.seed, integer=True)
        for key in ('horizon', 'warmup'):
            value = getattr(self, key)
            if value is not None:
                minimum = 1 if key == 'horizon' else 0
                setattr(self, key, _number(key, value, minimum=minimum, integer=True))
        try:
            self.critical_state = _to_state(self.critical_state)
        except ValueError as err:
            _fail('critical_state', str(err), path)
        self.gamma_mode = _not_none(self.gamma_mode, rc['gamma.mode'])
        if self.gamma_mode not in GAMMA_MODES:
            _fail('gamma_mode', _options(self.gamma_mode, GAMMA_MODES), path)
        self.tolerance = _number(
            'tolerance', _not_none(self.tolerance, rc['check.tolerance']), positive=True
        )

        # Policies and access probabilities
        if not self.policies:
            _fail('policy', 'At least one policy is required.', path)
        for name in self.policies:
            if name not in POLICIES:
                _fail('policy', _options(name, POLICIES), path)
        self.policies = tuple(self.policies)
        for key in ('alpha', 'alpha_c', 'alpha_s'):
            value = getattr(self, key)
            if value is None or value == OPTIMAL:
                setattr(self, key, OPTIMAL)
            elif (
                isinstance(value, bool)
                or not isinstance(value, (int, float))
                or not 0 <= value <= 1
            ):
                message = f'Got {value!r}. Must be a probability or {OPTIMAL!r}.'
                _fail(key, message, path)
            else:
                setattr(self, key, float(value))

        # Source parameterization
        pair = (self.q01 is not None, self.q10 is not None)
        forms = sum((any(pair), self.q_bar is not None, self.q_bar_M is not None))
        sweep_rate = self.sweep_variable == 'q_bar_M'
        if forms + sweep_rate != 1:
            _fail(
                'q01', 'Give exactly one of (q01, q10), q_bar, q_bar_M, '
                'or sweep.variable: q_bar_M.', path
            )
        if any(pair) and not all(pair):
            missing = 'q10' if pair[0] else 'q01'
            _fail(missing, 'q01 and q10 must be given together.', path)
        self.eta = _number('eta', self.eta, positive=True)

        # Sweep
        if self.sweep_variable is None:
            self.sweep_points = 1
        else:
            if self.sweep_variable not in SWEEP_VARIABLES:
                message = _options(self.sweep_variable, SWEEP_VARIABLES)
                _fail('sweep.variable', message, path)
            if self.sweep_variable == 'alpha' and 'random' not in self.policies:
                _fail('sweep.variable', 'Sweeping alpha needs the random policy.', path)
            if self.sweep_variable == 'alpha_s' and 'hybrid' not in self.policies:
                message = 'Sweeping alpha_s needs the hybrid policy.'
                _fail('sweep.variable', message, path)
            if self.sweep_variable == 'alpha_s' and self.alpha_c == OPTIMAL:
                self.alpha_c = 1.0
            for key in ('sweep_from', 'sweep_to'):
                name, value = key.replace('_', '.'), getattr(self, key)
                if value is None:
                    _fail(name, 'Sweep bounds are required.', path)
                setattr(self, key, _number(name, value, positive=self.sweep_log))
            self.sweep_points = _number(
                'sweep.points', self.sweep_points, minimum=1, integer=True
            )
            if self.sweep_variable != 'q_bar_M':
                for key in ('sweep_from', 'sweep_to'):
                    if getattr(self, key) > 1:
                        message = 'Access probabilities must lie in [0, 1].'
                        _fail(key.replace('_', '.'), message, path)
        self.sweep_log = bool(self.sweep_log)

        # Resolve every point once so infeasible sources fail early
        for index in range(self.sweep_points):
            self.source_at(index)

    def sweep_values(self):
        """
        Return the sweep values, or ``[None]`` for a single point.
        """
        if self.sweep_variable is None:
            return [None]
        if self.sweep_points == 1:
            return [self.sweep_from]
        space = np.geomspace if self.sweep_log else np.linspace
        return space(self.sweep_from, self.sweep_to, self.sweep_points).tolist()

    def source_at(self, index):
        """
        Return the `SourceModel` of sweep point `index`.
        """
        value = self.sweep_values()[index]
        if self.q01 is not None:
            key, make = 'q01', lambda: SourceModel(self.q01, self.q10)
        elif self.q_bar is not None:
            key, make = 'q_bar', lambda: SourceModel.from_rate(self.q_bar, self.eta)
        else:
            rate = self.q_bar_M if self.sweep_variable != 'q_bar_M' else value
            key = 'q_bar_M' if self.sweep_variable != 'q_bar_M' else 'sweep.to'
            make = lambda: SourceModel.from_rate(rate / self.M, self.eta)  # noqa: E731
        try:
            return make()
        except ValueError as err:
            _fail(key, str(err), self.path)

    def policy_at(self, index, name, source, mode=None):
        """
        Return the `AccessPolicy` of family `name` at sweep point `index`.
        """
        value = self.sweep_values()[index]
        if name == 'reactive':
            return AccessPolicy.reactive()
        if name == 'random':
            alpha = value if self.sweep_variable == 'alpha' else self.alpha
            if alpha == OPTIMAL:
                alpha = optimize_random(self.M)
            return AccessPolicy.random(alpha)
        alpha_c = self.alpha_c
        alpha_s = value if self.sweep_variable == 'alpha_s' else self.alpha_s
        if OPTIMAL in (alpha_c, alpha_s):
            mode = _not_none(mode, self.gamma_mode)
            result = optimize_hybrid(source, self.M, mode=mode)
            alpha_c = result.alpha_c_star if alpha_c == OPTIMAL else alpha_c
            alpha_s = result.alpha_s_star if alpha_s == OPTIMAL else alpha_s
        return AccessPolicy.hybrid(alpha_c, alpha_s)

    def resolved(self):
        """
        Return the scenario as a plain dictionary for the JSON sidecar.
        """
        out = asdict(self)
        out['policies'] = list(self.policies)
        out['sweep_values'] = self.sweep_values()
        return out


def _point_seed(seed, index, policy_index):
    """
    Return a seed for one sweep point and policy derived from the master seed.
    """
    state = np.random.SeedSequence([seed, index, policy_index]).generate_state(1)
    return int(state[0])


def _source_columns(scenario, source):
    return {
        'M': scenario.M,
        'q01': source.q01,
        'q10': source.q10,
        'q_bar': source.q_bar,
        'eta': source.eta,
        'gamma_mode': scenario.gamma_mode,
        'q_bar_M': source.q_bar * scenario.M,
    }


def _analyze_record(scenario, index, name):
    source = scenario.source_at(index)
    policy = scenario.policy_at(index, name, source)
    state = scenario.critical_state
    report = analyze(source, policy, scenario.M, scenario.gamma_mode, state)
    record = {'index': index, 'policy': name, 'critical_state': state}
    record.update(_source_columns(scenario, source))
    record.update({
        'alpha_c': policy.alpha_c,
        'alpha_s': policy.alpha_s,
        'gamma': report.channel.gamma,
        'load_G': report.channel.load_G,
        'throughput_S': report.channel.throughput_S,
        'aoii': report.aoii,
        'p_miss': report.p_miss,
        'e_w': report.cycle.e_w,
        'e_y': report.cycle.e_y,
    })
    return record, source, policy


def _check_ok(record, tolerance):
    """
    Whether every simulated column of `record` is within the relative tolerance
    of its closed form. Zero closed forms are compared in absolute terms.
    Columns other than the age are skipped when their closed form is not finite.
    """
    for name in CHECKED:
        analytic, simulated = record[name], record['sim_' + name]
        if not math.isfinite(analytic) and name != 'aoii':
            continue
        if not (math.isfinite(simulated) and math.isfinite(analytic)):
            return False
        scale = abs(analytic) if analytic else 1.0
        if abs(simulated - analytic) > tolerance * scale:
            return False
    return True


def _worker(task):
    """
    Evaluate one sweep point. Defined at module level so it can be pickled.
    """
    command, scenario, index, name, snapshot = task
    with rc.context(snapshot):
        if command == 'optimize':
            source = scenario.source_at(index)
            result = optimize_hybrid(source, scenario.M, mode=scenario.gamma_mode)
            record = {'index': index}
            record.update(_source_columns(scenario, source))
            record.update({
                'alpha_c_star': result.alpha_c_star,
                'alpha_s_star': result.alpha_s_star,
                'aoii_star': result.aoii_star,
                'load_star': result.load_star,
                'collapsed_to_random': result.collapsed_to_random,
                'gamma_star': result.gamma_star,
            })
            for baseline, policy in (
                ('aoii_reactive', AccessPolicy.reactive()),
                ('aoii_random', AccessPolicy.random(optimize_random(scenario.M))),
            ):
                report = analyze(source, policy, scenario.M, scenario.gamma_mode)
                record[baseline] = report.aoii
            return record

        record, source, policy = _analyze_record(scenario, index, name)
        if command == 'analyze':
            return record
        seed = _point_seed(scenario.seed, index, POLICIES.index(name))
        cfg = SimConfig(
            M=scenario.M,
            source=source,
            policy=policy,
            horizon=scenario.horizon,
            warmup=scenario.warmup,
            seed=seed,
            critical_state=scenario.critical_state,
        )
        metrics = run(cfg)
        record.update({
            'horizon': scenario.horizon,
            'warmup': metrics.warmup,
            'seed': seed,
            'sim_aoii': metrics.aoii_mean,
            'sim_ci95': metrics.ci95_aoii,
            'sim_p_miss': metrics.p_miss,
            'sim_visits': metrics.visits,
            'sim_e_w': metrics.e_w,
            'sim_e_y': metrics.e_y,
            'sim_load_G': metrics.realized_load,
            'sim_throughput_S': metrics.realized_throughput,
            'sim_gamma': metrics.realized_gamma,
            'sim_collisions': metrics.collisions,
        })
        record['check_ok'] = _check_ok(record, scenario.tolerance)
        return record


def _execute(command, scenario, columns, threads=None):
    """
    Evaluate every sweep point and return the records in sweep order.
    """
    threads = _to_count(_not_none(threads, rc['cli.threads']), 'threads')
    snapshot = dict(rc.items())
    if command == 'optimize':
        names = (None,)
    else:
        names = scenario.policies
    tasks = [
        (command, scenario, index, name, snapshot)
        for index in range(scenario.sweep_points)
        for name in names
    ]
    logger.info(
        'Running %s on %d points with %d threads.', command, len(tasks), threads
    )
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            records = list(executor.map(_worker, tasks))
    else:
        records = [_worker(task) for task in tasks]
    return pd.DataFrame.from_records(records, columns=columns)


def cmd_analyze(scenario, threads=None):
    """
    Evaluate the closed forms at every sweep point and policy.

    Parameters
    ----------
    scenario : ScenarioFile
        The scenario.
    threads : int, optional
        The number of worker processes. Default is :rc:`cli.threads`.

    Returns
    -------
    pandas.DataFrame
        One record per sweep point and policy with the columns
        `ANALYZE_COLUMNS`, ordered by sweep index then policy.
    """
    return _execute('analyze', scenario, ANALYZE_COLUMNS, threads)


def cmd_simulate(scenario, threads=None):
    """
    Simulate every sweep point and policy next to its closed forms. Each
    record gets its own seed derived from the scenario seed, the sweep
    index, and the policy, so the output does not depend on `threads`.

    Returns
    -------
    pandas.DataFrame
        One record per sweep point and policy with the columns
        `SIMULATE_COLUMNS`. The ``check_ok`` column flags whether the
        simulated age, missed-detection probability, and mean error and
        correct periods are within the scenario tolerance of their closed forms.
    """
    if scenario.horizon is None:
        _fail('horizon', 'The simulate command needs a horizon.', scenario.path)
    return _execute('simulate', scenario, SIMULATE_COLUMNS, threads)


def cmd_optimize(scenario, threads=None):
    """
    Optimize the hybrid policy at every sweep point and compare it with the
    reactive policy and the random policy with ``alpha = 1 / M``.
    """
    if scenario.sweep_variable not in (None, 'q_bar_M'):
        message = 'The optimize command can only sweep q_bar_M.'
        _fail('sweep.variable', message, scenario.path)
    return _execute('optimize', scenario, OPTIMIZE_COLUMNS, threads)


COMMANDS = {
    'analyze': cmd_analyze,
    'simulate': cmd_simulate,
    'optimize': cmd_optimize,
}


def write_output(df, out, command, scenario):
    """
    Write the records as CSV and, for file output, a JSON sidecar
    ``<out>.json`` with the resolved scenario and settings.
    """
    digits = rc['output.digits']
    kw = {'index': False, 'float_format': f'%.{digits}g', 'lineterminator': '\n'}
    if out == '-':
        df.to_csv(sys.stdout, **kw)
        return
    out = os.path.expanduser(out)
    df.to_csv(out, **kw)
    sidecar = {
        'schema_version': SCHEMA_VERSION,
        'command': command,
        'columns': list(df.columns),
        'scenario': scenario.resolved(),
        'rc': dict(rc.items()),
        'conversions': CONVERSIONS,
    }
    with open(out + '.json', 'w') as fh:
        json.dump(sidecar, fh, indent=2, default=str)
    logger.info('Wrote %d records to %r.', len(df), out)


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--scenario', required=True, help='The scenario file.')
    common.add_argument('--out', default='-', help='The CSV path, or - for stdout.')
    common.add_argument('--seed', type=int, help='Override the scenario seed.')
    common.add_argument('--threads', type=int, help='The number of worker processes.')
    common.add_argument(
        '-v', '--verbose', action='count', default=0, help='More logging.'
    )
    parser = argparse.ArgumentParser(
        prog='aoiikit',
        description='Age of incorrect information on random access channels.',
    )
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('analyze', parents=[common], help='Evaluate the closed forms.')
    simulate = sub.add_parser('simulate', parents=[common], help='Run the simulator.')
    simulate.add_argument(
        '--check', action='store_true',
        help='Exit with status 1 if a simulated age misses its closed form.',
    )
    sub.add_parser('optimize', parents=[common], help='Optimize the hybrid policy.')
    return parser


def main(argv=None):
    """
    Run the command line tool and return the exit status.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    try:
        scenario = ScenarioFile.from_file(args.scenario)
        if args.seed is not None:
            scenario.seed = _to_count(args.seed, 'seed', 0)
        df = COMMANDS[args.command](scenario, threads=args.threads)
        write_output(df, args.out, args.command, scenario)
    except (ValueError, KeyError, OSError, RuntimeError) as err:
        parser.error(str(err))
    if getattr(args, 'check', False) and not df['check_ok'].all():
        failed = df.loc[~df['check_ok'], ['index', 'policy']].to_dict('records')
        logger.error('Simulated metrics outside tolerance for %s.', failed)
        return 1
    return 0
