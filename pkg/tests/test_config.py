import os

import pytest

from cloudletopt import config


class TestUserConfig:

    def test_overrides_defaults(self):
        settings = config.read_user_config()
        assert settings['solver']['time_budget'] == 30.0
        assert settings['solver']['max_open_nodes'] == 200000
        assert settings['experiment']['seeds'] == 2
        assert settings['experiment']['params'] == {'n_locations': 6}

    def test_missing_user_file(self, tmpdir):
        config.set_conf_dir(str(tmpdir))
        assert config.read_user_config()['solver']['time_budget'] == 60.0

    def test_not_a_mapping(self, tmpdir):
        with open(os.path.join(str(tmpdir), 'config.yaml'), 'w') as f:
            f.write('- just\n- a list\n')
        config.set_conf_dir(str(tmpdir))
        with pytest.raises(ValueError, match='mapping'):
            config.read_user_config()


class TestCustomConfig:

    def test_whole_file(self, ref_data_dir):
        settings = config.read_custom_config(os.path.join(ref_data_dir, 'generator.yaml'))
        assert settings == {'n_locations': 3, 'n_services': 2, 'horizon': 2, 'k_max_range': [2, 5]}

    def test_merged_over_section(self, ref_data_dir):
        settings = config.read_custom_config(os.path.join(ref_data_dir, 'generator.yaml'), section='generator')
        assert settings['n_locations'] == 3
        assert settings['latency_remote'] == 150

    def test_empty_file(self, tmpdir):
        path = os.path.join(str(tmpdir), 'empty.yaml')
        open(path, 'w').close()
        assert config.read_custom_config(path, section='heuristic') == {'rho': 0.8}


class TestHelpers:

    def test_recursive_update(self):
        base = {'a': {'b': 1, 'c': 2}, 'd': [1]}
        assert config.recursive_dict_update(base, {'a': {'c': 3}, 'd': [2]}) == {'a': {'b': 1, 'c': 3}, 'd': [2]}

    def test_nested_copy(self):
        base = {'a': {'b': 1}}
        merged = config.recursive_dict_update({}, base)
        merged['a']['b'] = 2
        assert base['a']['b'] == 1

    def test_strip_strings(self):
        assert config.strip_strings({'a': ' x ', 'b': {'c': 'y\n'}, 'd': 4}) == {'a': 'x', 'b': {'c': 'y'}, 'd': 4}
