import json
import os

import numpy as np
import pytest

import builders
from cloudletopt.model import ScenarioValidationError, Solution, eligibility
from cloudletopt.scenario import (GeneratorParams, InvalidParamsError, ScenarioParseError, demand_profile, generate,
                                  generate_tiny, read_scenario, read_solution, write_scenario, write_solution)


def small_params(**changes):
    return GeneratorParams(n_locations=4, horizon=3, seed=42).replace(**changes)


class TestDemandProfile:

    def test_sinusoid(self):
        assert [demand_profile(10, t, 4, amplitude=0.5) for t in range(4)] == [10, 15, 10, 5]

    def test_zero_base(self):
        assert [demand_profile(0, t, 5, amplitude=0.9, noise=3.0) for t in range(5)] == [0] * 5

    def test_constant(self):
        assert demand_profile(7, np.arange(6), 6).tolist() == [7] * 6

    def test_never_negative(self):
        assert demand_profile(2, 0, 4, noise=-10.0) == 0


class TestGeneratorParams:

    def test_defaults_from_config(self):
        assert GeneratorParams.from_settings() == GeneratorParams()

    def test_overrides(self):
        params = GeneratorParams.from_settings({'n_locations': 5, 'k_max_range': [2, 3]}, seed=9)
        assert params.n_locations == 5
        assert params.k_max_range == (2, 3)
        assert params.seed == 9

    def test_unknown_parameter(self):
        with pytest.raises(InvalidParamsError, match='n_cities'):
            GeneratorParams.from_settings({'n_cities': 5})

    @pytest.mark.parametrize('changes', [
        {'n_locations': 0},
        {'horizon': 0},
        {'seed': -1},
        {'k_max_range': (0, 3)},
        {'k_max_range': (5, 3)},
        {'operating_cost_jitter': 1.0},
        {'penalty_factor': -1},
        {'include_remote_cloud': False, 'remote_replaces_cloudlet': True},
    ])
    def test_out_of_range(self, changes):
        with pytest.raises(InvalidParamsError):
            generate(small_params(**changes))


class TestGenerate:

    def test_sizes(self):
        scenario = generate(GeneratorParams(n_locations=19, include_remote_cloud=True, n_services=3, horizon=5,
                                            seed=42))
        assert scenario.shape == (20, 19, 3, 5)

    def test_remote_replaces_cloudlet(self):
        scenario = generate(GeneratorParams(n_locations=20, remote_replaces_cloudlet=True, seed=1))
        assert scenario.shape[:2] == (20, 20)
        assert scenario.user_clusters[0].local_cloudlet is None
        assert all(uc.local_cloudlet is not None for uc in scenario.user_clusters[1:])

    def test_without_remote(self):
        scenario = generate(small_params(include_remote_cloud=False))
        assert all(dc.is_cloudlet for dc in scenario.data_centers)

    def test_deterministic(self):
        assert write_scenario(generate(small_params())) == write_scenario(generate(small_params()))

    def test_seed_matters(self):
        assert generate(small_params(seed=1)) != generate(small_params(seed=2))

    def test_remote_too_slow_for_strictest_service(self):
        scenario = generate(small_params())
        assert not eligibility(scenario, 'remote', 'u-00', 'svc-1')
        assert eligibility(scenario, 'remote', 'u-00', 'svc-3')
        assert eligibility(scenario, 'cl-00', 'u-00', 'svc-1')
        assert not eligibility(scenario, 'cl-01', 'u-00', 'svc-1')

    def test_costs(self):
        scenario = generate(small_params())
        for dc in scenario.data_centers:
            if dc.is_cloudlet:
                assert dc.c_hw == 100000
                assert dc.c_fix == 50000 * dc.k_max
                assert all(13333 <= c <= 20000 for c in dc.c_op)
            else:
                assert dc.c_fix == dc.c_hw == 0
                assert dc.k_max >= scenario.demand.sum(axis=(0, 1)).max()
        marginal = max(max(dc.c_op) + dc.c_hw for dc in scenario.data_centers)
        assert scenario.penalty_costs.min() > marginal
        assert [sv.c_mig for sv in scenario.services] == [50000, 37500, 25000]

    def test_throughput_never_excludes(self):
        scenario = generate(small_params(qos_attr_count=3))
        assert [qa.id for qa in scenario.qos_attributes] == ['latency', 'throughput-1', 'throughput-2']
        required = np.array([sv.qos_req['latency'] for sv in scenario.services])
        latency_only = scenario.qos_guarantees[:, :, 0, None] <= required
        assert np.array_equal(scenario.eligibility_matrix(), latency_only)

    @pytest.mark.parametrize('seed', range(5))
    def test_tiny(self, seed):
        scenario = generate_tiny(seed)
        D, U, S, T = scenario.shape
        assert D <= 3 and U <= 3 and S <= 2 and T <= 2
        assert scenario.k_max.max() <= 3 and scenario.demand.max() <= 4


class TestScenarioFile:

    def test_reference_file(self, two_site, two_site_path):
        with open(two_site_path, 'rb') as f:
            assert read_scenario(f.read()) == two_site

    def test_round_trip(self):
        scenario = generate(small_params(qos_attr_count=2))
        data = write_scenario(scenario)
        assert data.endswith(b'\n')
        assert read_scenario(data) == scenario
        assert read_scenario(data.decode('utf-8')) == scenario

    def test_truncated(self):
        data = write_scenario(builders.two_site())
        with pytest.raises(ScenarioParseError) as exc_info:
            read_scenario(data[:len(data) // 2])
        assert exc_info.value.line > 1

    def test_not_utf8(self):
        with pytest.raises(ScenarioParseError):
            read_scenario(b'{"horizon": "\xff"}')

    @pytest.mark.parametrize('version', [None, 0, 2])
    def test_unsupported_version(self, version):
        document = json.loads(write_scenario(builders.two_site()))
        document['format_version'] = version
        with pytest.raises(ScenarioParseError, match='format_version'):
            read_scenario(json.dumps(document))

    def test_c_op_length(self):
        document = json.loads(write_scenario(builders.two_site()))
        document['data_centers'][1]['c_op'] = [5]
        with pytest.raises(ScenarioValidationError) as exc_info:
            read_scenario(json.dumps(document))
        assert exc_info.value.field == 'data_centers[1].c_op'

    @pytest.mark.parametrize('path,field', [
        (('demand',), 'demand'),
        (('data_centers', 0, 'k_max'), 'data_centers[0].k_max'),
        (('services', 0, 'qos_req'), 'services[0].qos_req'),
    ])
    def test_missing_field(self, path, field):
        document = json.loads(write_scenario(builders.two_site()))
        parent = document
        for key in path[:-1]:
            parent = parent[key]
        del parent[path[-1]]
        with pytest.raises(ScenarioValidationError) as exc_info:
            read_scenario(json.dumps(document))
        assert exc_info.value.field == field

    def test_unknown_kind(self):
        document = json.loads(write_scenario(builders.two_site()))
        document['data_centers'][0]['kind'] = 'fog'
        with pytest.raises(ScenarioValidationError, match='fog'):
            read_scenario(json.dumps(document))

    def test_unknown_keys_warn(self):
        document = json.loads(write_scenario(builders.two_site()))
        document['comment'] = 'hand edited'
        with pytest.warns(UserWarning, match='comment'):
            assert read_scenario(json.dumps(document)) == builders.two_site()

    def test_written_to_disk(self, tmpdir):
        path = os.path.join(str(tmpdir), 'scenario.json')
        with open(path, 'wb') as f:
            f.write(write_scenario(builders.two_site()))
        with open(path, 'rb') as f:
            assert read_scenario(f.read()) == builders.two_site()


class TestSolutionFile:

    def test_round_trip(self, two_site):
        solution = Solution.empty(two_site)
        assert read_solution(write_solution(solution)) == solution

    def test_fractional_values_survive(self, two_site):
        solution = Solution([0, 0.5], [0, 1], np.zeros((2, 2, 1, 2)), two_site.demand)
        assert read_solution(write_solution(solution)).x.tolist() == [0, 0.5]

    def test_missing_field(self, two_site):
        document = json.loads(write_solution(Solution.empty(two_site)))
        del document['y_pen']
        with pytest.raises(ScenarioValidationError, match='y_pen'):
            read_solution(json.dumps(document))
