import itertools
import math
import os

import numpy as np
import pytest

import builders
from cloudletopt import heuristic
from cloudletopt.exact import (BranchAndBound, SearchSpaceError, SolveLimits, SolveStatus, _compositions, brute_force,
                               build_milp, export_mps, solve)
from cloudletopt.model import Scenario, Solution, migration_tensor, validate
from cloudletopt.scenario import GeneratorParams, generate, generate_tiny

# Number of random tiny scenarios cross-checked against exhaustive search
ORACLE_RUNS = int(os.environ.get('CLOUDLETOPT_ORACLE_RUNS', '200'))


def closed_cloudlet():
    """Opening the only eligible cloudlet costs more than penalizing its demand."""
    return builders.build([builders.cloudlet('cl', 'u', k_max=2, c_fix=1000, c_hw=100, c_op=1)],
                          [builders.cluster('u', 'cl')], [builders.service('s')], [[[1]]], [[10]], penalty=500)


def remote_only(penalty):
    return builders.build([builders.remote(k_max=10, c_op=50)], [builders.cluster('u')], [builders.service('s')],
                          [[[3]]], [[10]], penalty=penalty)


@pytest.fixture(scope='module')
def oracle_suite():
    """(seed, scenario, brute-force report, branch-and-bound report) for tiny scenarios within the guard."""
    suite = []
    for seed in itertools.count():
        if len(suite) >= ORACLE_RUNS or seed >= 20 * ORACLE_RUNS:
            break
        scenario = generate_tiny(seed)
        try:
            oracle = brute_force(scenario)
        except SearchSpaceError:
            continue
        suite.append((seed, scenario, oracle, solve(build_milp(scenario), SolveLimits(time_budget=None))))
    return suite


class TestBranchAndBound:

    def test_zero_demand(self, two_site):
        scenario = two_site.with_demand(np.zeros((2, 1, 2), dtype=np.int64))
        report = solve(build_milp(scenario))
        assert report.status is SolveStatus.optimal
        assert report.objective == 0
        assert report.solution.x.sum() == 0

    def test_two_site(self, two_site):
        report = solve(build_milp(two_site))
        assert report.status is SolveStatus.optimal
        assert report.objective == report.best_bound == 270
        assert report.cost.as_dict() == {'fixed': 100, 'operational': 90, 'penalty': 0, 'migration': 0,
                                         'hardware': 80, 'total': 270}
        assert report.solution.x.tolist() == [0, 1] or report.solution.x.tolist() == [1, 1]
        assert report.solution.z[1] == 4
        assert validate(two_site, report.solution) == []

    def test_keeps_expensive_cloudlet_closed(self):
        report = solve(build_milp(closed_cloudlet()))
        assert report.objective == 500
        assert report.solution.x.tolist() == [0]
        assert report.cost.penalty == 500

    @pytest.mark.parametrize('penalty,objective,served', [(60, 150, 3), (40, 120, 0)])
    def test_remote_only(self, penalty, objective, served):
        report = solve(build_milp(remote_only(penalty)))
        assert report.objective == objective
        assert report.solution.y.sum() == served

    def test_time_budget(self, two_site):
        with pytest.warns(UserWarning, match='time-limit'):
            report = solve(build_milp(two_site), SolveLimits(time_budget=0))
        assert report.status is SolveStatus.time_limit
        assert report.objective <= heuristic.solve(two_site, 'heu1').cost.total
        assert validate(two_site, report.solution) == []
        assert report.best_bound <= report.objective

    def test_time_budget_without_warm_start(self, two_site):
        with pytest.warns(UserWarning, match='time-limit'):
            report = solve(build_milp(two_site), SolveLimits(time_budget=0, warm_start=False))
        assert report.solution == Solution.empty(two_site)

    def test_warm_start_logged(self, two_site, capsys):
        solve(build_milp(two_site), SolveLimits(node_budget=0), verbose=True)
        assert 'Seeded incumbent with the greedy solution' in capsys.readouterr().out

    def test_round_down_is_feasible(self):
        scenario = generate(GeneratorParams(n_locations=4, horizon=2, seed=2))
        milp = build_milp(scenario)
        search = BranchAndBound(milp)
        values = search._relax(search._lower, search._upper).x
        rounded = search.round_down(values)
        assert milp.is_feasible(rounded)
        assert validate(scenario, milp.to_solution(rounded)) == []

    def test_node_budget(self, two_site):
        report = solve(build_milp(two_site), SolveLimits(node_budget=1))
        assert report.status in (SolveStatus.optimal, SolveStatus.feasible_bound_gap)
        assert report.nodes <= 1
        assert report.best_bound <= report.objective
        assert validate(two_site, report.solution) == []

    def test_limits_from_settings(self):
        limits = SolveLimits.from_settings()
        assert limits.time_budget == 30.0
        assert limits.node_budget is None
        assert SolveLimits.from_settings(time_budget=5, node_budget=None).time_budget == 5

    def test_verbose(self, two_site, capsys):
        solve(build_milp(two_site), verbose=True)
        assert 'Finished: optimal' in capsys.readouterr().out


class TestBruteForce:

    def test_two_site(self, two_site):
        report = brute_force(two_site, guard=10 ** 8)
        assert report.objective == 270
        assert validate(two_site, report.solution) == []

    def test_keeps_expensive_cloudlet_closed(self):
        report = brute_force(closed_cloudlet())
        assert report.objective == 500
        assert report.solution.x.tolist() == [0]

    @pytest.mark.parametrize('penalty,served', [(60, 3), (40, 0)])
    def test_remote_only(self, penalty, served):
        assert brute_force(remote_only(penalty)).solution.y.sum() == served

    def test_guard(self):
        with pytest.raises(SearchSpaceError):
            brute_force(closed_cloudlet(), guard=1)

    def test_assignment_limit(self, two_site):
        with pytest.raises(SearchSpaceError):
            brute_force(two_site, guard=10 ** 8, max_assignments=100)

    @pytest.mark.parametrize('n_cells,total', [(0, 3), (1, 0), (3, 2), (16, 2), (4, 5)])
    def test_compositions(self, n_cells, total):
        vectors = _compositions(n_cells, total)
        assert vectors.shape == (math.comb(total + n_cells, n_cells), n_cells)
        assert np.all(vectors >= 0) and np.all(vectors.sum(axis=1) <= total)
        assert len({tuple(v) for v in vectors}) == len(vectors)

    def test_many_cells_on_a_small_data_center(self):
        # 16 eligible cells on k_max = 2: 153 assignments, far fewer than 3 ** 16
        scenario = builders.build([builders.remote(k_max=2)],
                                  [builders.cluster('u{}'.format(u)) for u in range(8)],
                                  [builders.service('s0'), builders.service('s1')],
                                  np.ones((8, 2, 1), dtype=np.int64), [[10] * 8], penalty=100)
        report = brute_force(scenario)
        assert report.solution.y.sum() == 2
        assert report.objective == 2 * 50 + 14 * 100
        assert validate(scenario, report.solution) == []


class TestOracle:

    def test_suite_size(self, oracle_suite):
        assert len(oracle_suite) == ORACLE_RUNS

    def test_objectives_match(self, oracle_suite):
        for seed, scenario, oracle, report in oracle_suite:
            assert report.status is SolveStatus.optimal, seed
            assert report.objective == oracle.objective, seed
            assert report.cost.total == report.objective, seed

    def test_solutions_validate(self, oracle_suite):
        for seed, scenario, oracle, report in oracle_suite:
            assert validate(scenario, report.solution) == [], seed
            assert validate(scenario, oracle.solution) == [], seed

    def test_migrations_tight(self, oracle_suite):
        checked = 0
        for seed, scenario, oracle, report in oracle_suite:
            if scenario.horizon < 2 or not np.all(scenario.c_mig > 0):
                continue
            checked += 1
            assert np.array_equal(report.migrations, migration_tensor(scenario, report.solution.y)), seed
        assert checked > 0

    def test_higher_penalties_never_lower_the_optimum(self, oracle_suite):
        for seed, scenario, oracle, report in oracle_suite[:25]:
            raised = Scenario(scenario.horizon, scenario.qos_attributes, scenario.data_centers,
                              scenario.user_clusters, scenario.services, scenario.demand, scenario.qos_guarantees,
                              scenario.penalty_costs + 1 + seed % 3)
            assert brute_force(raised).objective >= oracle.objective, seed
            assert solve(build_milp(raised), SolveLimits(time_budget=None)).objective >= report.objective, seed

    @pytest.mark.parametrize('strategy', ['heu1', 'heu2'])
    def test_heuristics_never_beat_optimum(self, oracle_suite, strategy):
        for seed, scenario, oracle, report in oracle_suite:
            result = heuristic.solve(scenario, strategy)
            assert validate(scenario, result.solution) == [], seed
            assert result.cost.total >= oracle.objective, seed

    @pytest.mark.skipif(os.environ.get('CLOUDLETOPT_MPS_CHECK', '0') == '0',
                        reason='set CLOUDLETOPT_MPS_CHECK=1 to cross-check with an external MILP engine')
    def test_external_engine(self, oracle_suite, tmpdir):
        pulp = pytest.importorskip('pulp')
        engine = pulp.PULP_CBC_CMD(msg=False)
        if not engine.available():
            pytest.skip('CBC is not available')
        for seed, scenario, oracle, report in oracle_suite[:10]:
            path = os.path.join(str(tmpdir), 'tiny-{}.mps'.format(seed))
            with open(path, 'wb') as f:
                f.write(export_mps(build_milp(scenario)))
            _, problem = pulp.LpProblem.fromMPS(path)
            problem.solve(engine)
            assert pulp.LpStatus[problem.status] == 'Optimal', seed
            assert round(pulp.value(problem.objective) or 0) == report.objective, seed
