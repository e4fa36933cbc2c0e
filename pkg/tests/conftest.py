"""General test fixtures."""

import os

import pytest

import builders


@pytest.fixture(scope="session")
def ref_data_dir():
    return os.path.join(os.path.dirname(__file__), 'data')


@pytest.fixture(autouse=True)
def user_config(ref_data_dir):
    import cloudletopt.config
    cloudletopt.config.set_conf_dir(ref_data_dir)


@pytest.fixture
def two_site():
    return builders.two_site()


@pytest.fixture
def two_site_path(ref_data_dir):
    return os.path.join(ref_data_dir, 'two_site.json')
