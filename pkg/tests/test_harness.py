import math
import os

import pandas as pd
import pytest

from cloudletopt import harness
from cloudletopt.harness import (ContractBreachError, ExperimentConfig, ExperimentResult, run_bench, run_experiment,
                                 run_instance, summarize, write_results_csv, write_summary_csv)
from cloudletopt.model import CostBreakdown, Solution
from cloudletopt.scenario import InvalidParamsError

SMALL = {'n_locations': 2, 'n_services': 2, 'k_max_range': [1, 4]}


def result(axis_value, solver, total, wall_time=0.01, seed=0, status='feasible', ratio=None):
    return ExperimentResult(axis_value, seed, solver, CostBreakdown(operational=total), wall_time, status, ratio)


def small_config(**changes):
    settings = dict(axis='time-slots', values=[1, 2], seeds=[0, 1], params=dict(SMALL), record_timings=False)
    settings.update(changes)
    return ExperimentConfig(**settings)


class TestExperimentConfig:

    def test_seed_count(self):
        assert small_config(seeds=3).seeds == (0, 1, 2)

    @pytest.mark.parametrize('changes', [
        {'axis': 'services'},
        {'values': []},
        {'values': [2, 1]},
        {'values': [1, 1]},
        {'seeds': []},
        {'solvers': ['cplex']},
        {'solvers': ['heu1', 'heu1']},
        {'workers': 0},
    ])
    def test_invalid(self, changes):
        with pytest.raises(InvalidParamsError):
            small_config(**changes)

    def test_unknown_setting(self):
        with pytest.raises(InvalidParamsError, match='repeats'):
            ExperimentConfig.from_settings({'axis': 'locations', 'values': [3], 'seeds': 1, 'repeats': 2})

    def test_from_file(self, ref_data_dir):
        cfg = ExperimentConfig.from_file(os.path.join(ref_data_dir, 'bench.yaml'))
        assert cfg.axis == 'time-slots'
        assert cfg.values == (1, 2)
        assert cfg.seeds == (3, 4)
        assert cfg.solvers == ('exact', 'heu1', 'heu2')
        assert cfg.record_timings is False
        assert cfg.rho == 0.8
        assert cfg.time_budget == 60
        assert cfg.params['n_locations'] == 2
        assert cfg.params['k_max_range'] == [1, 4]

    def test_from_file_uses_user_defaults(self, ref_data_dir, tmpdir):
        path = os.path.join(str(tmpdir), 'sweep.yaml')
        with open(path, 'w') as f:
            f.write('axis: locations\nvalues: [3, 4]\n')
        cfg = ExperimentConfig.from_file(path)
        assert cfg.axis == 'locations'
        assert cfg.seeds == (0, 1)

    def test_generator_params(self):
        params = small_config(axis='locations', values=[3]).generator_params(3, 7)
        assert params.n_locations == 3
        assert params.seed == 7
        assert params.n_services == 2


class TestRunInstance:

    def test_all_solvers(self):
        results = run_instance(small_config(), 2, 0)
        assert [r.solver for r in results] == ['exact', 'heu1', 'heu2']
        exact, heu1, heu2 = results
        assert exact.status == 'optimal'
        assert exact.cost_ratio == 1.0
        for r in (heu1, heu2):
            assert r.cost.total >= exact.cost.total
            assert r.cost_ratio >= 1.0

    def test_ratios_need_exact(self):
        results = run_instance(small_config(solvers=['heu1']), 1, 0)
        assert results[0].cost_ratio is None

    def test_contract_breach(self, monkeypatch):
        def broken(config, scenario, solver):
            empty = Solution.empty(scenario)
            # Leaves all demand uncovered
            return Solution(empty.x, empty.z, empty.y, 0 * scenario.demand), CostBreakdown(), 'feasible'
        monkeypatch.setattr(harness, '_run_solver', broken)
        with pytest.raises(ContractBreachError, match='heu1'):
            run_instance(small_config(solvers=['heu1']), 1, 0)


class TestRunExperiment:

    def test_rows(self):
        results = run_experiment(small_config())
        assert len(results) == 2 * 2 * 3
        assert [(r.axis_value, r.seed) for r in results[:3]] == [(1, 0)] * 3

    def test_timeouts_left_out(self, tmpdir):
        cfg = small_config(values=[2], seeds=[0], time_budget=0)
        with pytest.warns(UserWarning, match='time budget'):
            results = run_experiment(cfg)
        assert results[0].timed_out
        path = os.path.join(str(tmpdir), 'results.csv')
        write_results_csv(results, path, record_timings=False)
        frame = pd.read_csv(path)
        assert list(frame['solver']) == ['heu1', 'heu2']
        assert frame['cost_ratio'].isna().all()

    def test_parallel_matches_serial(self):
        cfg = small_config(solvers=['heu1', 'heu2'])
        serial = run_experiment(cfg)
        parallel = run_experiment(small_config(solvers=['heu1', 'heu2'], workers=2))
        assert [(r.axis_value, r.seed, r.solver, r.cost) for r in parallel] == \
            [(r.axis_value, r.seed, r.solver, r.cost) for r in serial]


class TestSummarize:

    def test_interval(self):
        stats = summarize([result(1, 'heu1', total) for total in (1, 2, 3)], metrics=['total'])
        assert len(stats) == 1
        row = stats.iloc[0]
        assert row['count'] == 3
        assert row['mean'] == pytest.approx(2)
        assert row['std'] == pytest.approx(1)
        assert row['ci_high'] - row['mean'] == pytest.approx(1.96 / math.sqrt(3))
        assert row['mean'] - row['ci_low'] == pytest.approx(1.96 / math.sqrt(3))

    def test_equal_samples(self):
        row = summarize([result(1, 'heu1', 5)] * 4, metrics=['total']).iloc[0]
        assert row['std'] == 0
        assert row['ci_low'] == row['ci_high'] == 5

    def test_single_sample(self):
        row = summarize([result(1, 'heu1', 5)], metrics=['total']).iloc[0]
        assert row['count'] == 1
        assert math.isnan(row['std'])
        assert math.isnan(row['ci_low'])

    def test_groups(self):
        results = [result(1, 'heu1', 5), result(2, 'heu1', 6), result(1, 'heu2', 7, ratio=1.5)]
        stats = summarize(results)
        keys = list(zip(stats['axis'], stats['solver'], stats['metric']))
        assert keys == [(1, 'heu1', 'total'), (1, 'heu1', 'wall_ms'), (1, 'heu2', 'cost_ratio'),
                        (1, 'heu2', 'total'), (1, 'heu2', 'wall_ms'), (2, 'heu1', 'total'), (2, 'heu1', 'wall_ms')]

    def test_without_timings(self):
        stats = summarize([result(1, 'heu1', 5)], record_timings=False)
        assert list(stats['metric']) == ['total']

    def test_timeouts_skipped(self):
        stats = summarize([result(1, 'exact', 5, status='time-limit'), result(1, 'heu1', 6)], metrics=['total'])
        assert list(stats['solver']) == ['heu1']


class TestCsvOutput:

    def test_results_columns(self, tmpdir):
        path = os.path.join(str(tmpdir), 'results.csv')
        write_results_csv([result(1, 'heu1', 5, wall_time=0.0123456, ratio=1.25)], path)
        with open(path, newline='') as f:
            lines = f.read().split('\n')
        assert lines[0] == ','.join(harness.CSV_COLUMNS)
        assert lines[1] == '1,0,heu1,feasible,0,5,0,0,0,5,12.346,1.250000'
        assert lines[2] == ''

    def test_summary_na(self, tmpdir):
        path = os.path.join(str(tmpdir), 'summary.csv')
        write_summary_csv(summarize([result(1, 'heu1', 5)], metrics=['total']), path)
        with open(path) as f:
            lines = f.read().splitlines()
        assert lines[0] == 'axis,solver,metric,count,mean,std,ci_low,ci_high'
        assert lines[1] == '1,heu1,total,1,5.000000,NA,NA,NA'

    def test_deterministic_without_timings(self, tmpdir):
        outputs = []
        for name in ('a', 'b'):
            path = os.path.join(str(tmpdir), name + '.csv')
            write_results_csv(run_experiment(small_config()), path, record_timings=False)
            with open(path, 'rb') as f:
                outputs.append(f.read())
        assert outputs[0] == outputs[1]
        assert b',,' in outputs[0]


class TestRunBench:

    def test_files(self, ref_data_dir, tmpdir):
        out_dir = os.path.join(str(tmpdir), 'bench')
        results = run_bench(ExperimentConfig.from_file(os.path.join(ref_data_dir, 'bench.yaml')), out_dir)
        assert len(results) == 12
        assert sorted(os.listdir(out_dir)) == ['cost_ratio.svg', 'results.csv', 'summary.csv']
        summary = pd.read_csv(os.path.join(out_dir, 'summary.csv'))
        assert set(summary['metric']) == {'total', 'cost_ratio'}

    def test_runtime_chart(self, tmpdir):
        out_dir = str(tmpdir)
        run_bench(small_config(values=[1], seeds=[0], record_timings=True), out_dir)
        with open(os.path.join(out_dir, 'runtime.svg'), 'rb') as f:
            assert b'<svg' in f.read()


acceptance = pytest.mark.skipif(os.environ.get('CLOUDLETOPT_ACCEPTANCE', '0') == '0',
                                reason='set CLOUDLETOPT_ACCEPTANCE=1 to run the full evaluation sweeps')


@pytest.fixture(scope='module')
def slot_sweep():
    """Every solver on 30 generated six-location instances per horizon of 1 to 3 slots."""
    cfg = ExperimentConfig(axis='time-slots', values=[1, 2, 3], seeds=30, params={'n_locations': 6},
                           workers=int(os.environ.get('CLOUDLETOPT_WORKERS', '1')))
    return run_experiment(cfg)


def mean_ratio(results, solver, value):
    ratios = [r.cost_ratio for r in results
              if r.solver == solver and r.axis_value == value and r.cost_ratio is not None]
    assert ratios, (solver, value)
    return sum(ratios) / len(ratios)


@acceptance
class TestAcceptance:

    @pytest.mark.parametrize('slots', [1, 2, 3])
    def test_uncapped_within_ten_percent(self, slot_sweep, slots):
        assert mean_ratio(slot_sweep, 'heu1', slots) <= 1.10

    @pytest.mark.parametrize('slots', [1, 2, 3])
    def test_cap_costs_more(self, slot_sweep, slots):
        assert mean_ratio(slot_sweep, 'heu1', slots) < mean_ratio(slot_sweep, 'heu2', slots)

    def test_speedup(self, slot_sweep):
        times = {}
        for r in slot_sweep:
            if r.axis_value == 3:
                times.setdefault(r.seed, {})[r.solver] = r
        speedups = [runs['exact'].wall_time / runs['heu1'].wall_time for runs in times.values()
                    if runs['exact'].status == 'optimal']
        assert speedups
        assert sorted(speedups)[len(speedups) // 2] >= 100

    def test_heuristic_scales_with_horizon(self):
        cfg = ExperimentConfig(axis='time-slots', values=[1, 2, 3, 4, 5], seeds=[0], solvers=['heu1'],
                               params={'n_locations': 20})
        times = {r.axis_value: r.wall_time for r in run_experiment(cfg)}
        assert sum(times.values()) < 5
        for slots, wall_time in times.items():
            # Linear up to a factor of two for timer noise
            assert wall_time <= 2 * slots * times[1], slots
