'''
Experiment runner: parameter sweeps over generated scenarios, statistics,
CSV output and charts.

A sweep varies either the number of time slots or the number of locations,
generates one scenario per (axis value, seed), and runs every requested
solver on it. Every solution is validated before it is recorded.
'''

import concurrent.futures
import math
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import config, exact, heuristic
from .charts import emit_chart
from .model import validate
from .scenario import GeneratorParams, InvalidParamsError, generate

AXES = {'time-slots': 'horizon', 'locations': 'n_locations'}
SOLVERS = ('exact', 'heu1', 'heu2')
CSV_COLUMNS = ['axis', 'seed', 'solver', 'status', 'fixed', 'operational', 'penalty', 'migration', 'hardware',
               'total', 'wall_ms', 'cost_ratio']
# Normal approximation of a two-sided 95% interval
Z_95 = 1.96


class ContractBreachError(RuntimeError):
    """A solver produced a solution that fails validation."""
    pass


@dataclass
class ExperimentConfig:
    """One sweep.

    :param params: generator settings shared by every instance; the axis
        value and the seed are filled in per instance
    """
    axis: str
    values: tuple
    seeds: tuple
    solvers: tuple = SOLVERS
    params: dict = field(default_factory=dict)
    time_budget: float = 60.0
    node_budget: int = None
    rho: float = 0.8
    record_timings: bool = True
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.seeds, int):
            self.seeds = tuple(range(self.seeds))
        self.values = tuple(self.values)
        self.seeds = tuple(self.seeds)
        self.solvers = tuple(self.solvers)
        if self.axis not in AXES:
            raise InvalidParamsError('Unknown sweep axis {!r}; expected one of {}'.format(self.axis, ', '.join(AXES)))
        if not self.values or any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise InvalidParamsError('Axis values must be non-empty and strictly increasing, got {}'.format(
                list(self.values)))
        if not self.seeds:
            raise InvalidParamsError('At least one seed is required')
        unknown = set(self.solvers) - set(SOLVERS)
        if not self.solvers or unknown or len(set(self.solvers)) != len(self.solvers):
            raise InvalidParamsError('Solvers must be distinct names from {}, got {}'.format(
                ', '.join(SOLVERS), list(self.solvers)))
        if self.workers < 1:
            raise InvalidParamsError('workers must be >= 1, got {}'.format(self.workers))

    @classmethod
    def from_settings(cls, settings, generator=None, rho=None):
        """Build a config from an ``experiment`` settings dictionary.

        :param generator: generator settings the per-experiment ``params`` are merged over
        :param rho: heuristic cap fraction, unless the settings give one
        """
        values = dict(settings)
        params = config.recursive_dict_update(dict(generator or {}), values.pop('params', None) or {})
        known = {'axis', 'values', 'seeds', 'solvers', 'time_budget', 'node_budget', 'rho', 'record_timings',
                 'workers'}
        unknown = set(values) - known
        if unknown:
            raise InvalidParamsError('Unknown experiment settings: {}'.format(', '.join(sorted(unknown))))
        if rho is not None:
            values.setdefault('rho', rho)
        return cls(params=params, **values)

    @classmethod
    def from_file(cls, path):
        """Read a YAML experiment file, merged over the configured defaults."""
        settings = config.read_user_config()
        return cls.from_settings(config.read_custom_config(path, section='experiment'),
                                 generator=settings.get('generator'), rho=settings['heuristic']['rho'])

    def generator_params(self, value, seed):
        return GeneratorParams.from_settings(self.params, **{AXES[self.axis]: value, 'seed': seed})


@dataclass
class ExperimentResult:
    """One solver run on one generated instance."""
    axis_value: int
    seed: int
    solver: str
    cost: object
    wall_time: float
    status: str
    cost_ratio: float = None

    @property
    def timed_out(self):
        return self.status == exact.SolveStatus.time_limit.value


def _run_solver(config, scenario, solver):
    """Run one solver; returns (solution, cost, status)."""
    if solver == 'exact':
        limits = exact.SolveLimits(time_budget=config.time_budget, node_budget=config.node_budget)
        report = exact.solve(exact.build_milp(scenario), limits)
        return report.solution, report.cost, report.status.value
    strategy = heuristic.Strategy.create(solver, config.rho if solver == 'heu2' else None)
    result = heuristic.solve(scenario, strategy)
    return result.solution, result.cost, 'feasible'


def run_instance(config, value, seed):
    """Generate the instance for ``(value, seed)`` and run every configured solver on it."""
    scenario = generate(config.generator_params(value, seed))
    results = []
    for solver in config.solvers:
        start = time.perf_counter()
        solution, cost, status = _run_solver(config, scenario, solver)
        wall_time = time.perf_counter() - start
        if solution is not None:
            violations = validate(scenario, solution)
            if violations:
                raise ContractBreachError('{} produced an infeasible solution for {}={}, seed {}: {}'.format(
                    solver, config.axis, value, seed, violations[:5]))
        results.append(ExperimentResult(value, seed, solver, cost, wall_time, status))
    reference = next((r for r in results if r.solver == 'exact'), None)
    if reference is not None and reference.status == exact.SolveStatus.optimal.value:
        for result in results:
            if reference.cost.total > 0:
                result.cost_ratio = result.cost.total / reference.cost.total
            elif result.cost.total == 0:
                result.cost_ratio = 1.0
    return results


class ExperimentRunner(object):
    """Runs a sweep and keeps its results in (axis, seed, solver) order."""

    def __init__(self, config, verbose=False):
        self.config = config
        self.verbose = verbose

    def log(self, msg_template, *args):
        """Print a timestamped message if verbose."""
        if self.verbose:
            print(time.strftime('%H:%M:%S ') + msg_template.format(*args))

    def run(self):
        cfg = self.config
        instances = [(value, seed) for value in cfg.values for seed in cfg.seeds]
        self.log('Running {} instances of the {} sweep with {}', len(instances), cfg.axis, ', '.join(cfg.solvers))
        if cfg.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                batches = list(pool.map(run_instance, [cfg] * len(instances), *zip(*instances)))
        else:
            batches = []
            for value, seed in instances:
                batches.append(run_instance(cfg, value, seed))
                self.log('{}={} seed {}: {}', cfg.axis, value, seed,
                         ', '.join('{} {}'.format(r.solver, r.cost.total if r.cost else '-') for r in batches[-1]))
        results = [result for batch in batches for result in batch]
        timeouts = [r for r in results if r.timed_out]
        if timeouts:
            warnings.warn('{} exact runs hit the time budget and are left out of the tables'.format(len(timeouts)))
        return results


def run_experiment(config, verbose=False):
    """Run a sweep and return its :class:`ExperimentResult` list."""
    return ExperimentRunner(config, verbose).run()


def results_frame(results, record_timings=True):
    """Results as a table with the CSV columns, leaving out timed-out runs."""
    rows = []
    for r in results:
        if r.timed_out:
            continue
        row = {'axis': r.axis_value, 'seed': r.seed, 'solver': r.solver, 'status': r.status}
        row.update({k: v for k, v in r.cost.as_dict().items()})
        row['wall_ms'] = r.wall_time * 1000 if record_timings else np.nan
        row['cost_ratio'] = np.nan if r.cost_ratio is None else r.cost_ratio
        rows.append(row)
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def summarize(results, metrics=('wall_ms', 'total', 'cost_ratio'), record_timings=True):
    """Mean, sample standard deviation and 95% interval per (axis value, solver, metric).

    Groups without samples are absent; a single sample has an undefined
    (NaN) deviation and interval.
    """
    frame = results_frame(results, record_timings)
    long = frame.melt(id_vars=['axis', 'solver'], value_vars=list(metrics), var_name='metric')
    long = long.dropna(subset=['value'])
    long['value'] = long['value'].astype(float)
    stats = long.groupby(['axis', 'solver', 'metric'], sort=True)['value'].agg(['count', 'mean', 'std'])
    stats = stats.reset_index()
    half = Z_95 * stats['std'] / np.sqrt(stats['count'])
    stats['ci_low'] = stats['mean'] - half
    stats['ci_high'] = stats['mean'] + half
    return stats[['axis', 'solver', 'metric', 'count', 'mean', 'std', 'ci_low', 'ci_high']]


def _decimal(value, digits):
    return '' if value is None or (isinstance(value, float) and math.isnan(value)) else '{:.{}f}'.format(value, digits)


def write_results_csv(results, path, record_timings=True):
    frame = results_frame(results, record_timings)
    frame['wall_ms'] = [_decimal(v, 3) for v in frame['wall_ms']]
    frame['cost_ratio'] = [_decimal(v, 6) for v in frame['cost_ratio']]
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')


def write_summary_csv(stats, path):
    stats.to_csv(path, index=False, encoding='utf-8', lineterminator='\n', float_format='%.6f', na_rep='NA')


def run_bench(config, out_dir, verbose=False):
    """Run a sweep and write results.csv, summary.csv and the charts into ``out_dir``."""
    runner = ExperimentRunner(config, verbose)
    results = runner.run()
    os.makedirs(out_dir, exist_ok=True)
    write_results_csv(results, os.path.join(out_dir, 'results.csv'), config.record_timings)
    stats = summarize(results, record_timings=config.record_timings)
    write_summary_csv(stats, os.path.join(out_dir, 'summary.csv'))
    for kind, metric, name in (('runtime-log', 'wall_ms', 'runtime.svg'), ('cost-ratio', 'cost_ratio', 'cost_ratio.svg')):
        if (stats['metric'] == metric).any():
            with open(os.path.join(out_dir, name), 'wb') as chart:
                chart.write(emit_chart(stats, kind, config.axis))
        else:
            runner.log('No {} statistics, skipping {}', metric, name)
    runner.log('Wrote {} results to {}', len(results), out_dir)
    return results
