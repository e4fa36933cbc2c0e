'''
Handles loading the configuration YAML files.

Packaged defaults live in ``defaults.yaml`` next to this module; a user may
override any of them in ``config.yaml`` inside their configuration folder.
'''

import collections.abc
import os

import appdirs
import pkg_resources
from ruamel.yaml import YAML


def set_conf_dir(path=appdirs.user_config_dir('cloudletopt', 'cloudletopt')):
    """Set where to read user configuration files from.

    Defaults to the system-specific default user configuration folder.

    :param path: path to a configuration folder
    """
    global user_conf_dir, user_conf_path
    user_conf_dir = path
    user_conf_path = os.path.join(user_conf_dir, 'config.yaml')


set_conf_dir()  # Set the default paths initially


def read_user_config():
    """Read the configuration settings.

    We first read the defaults supplied with this package. Then we look in
    the user configuration folder for machine- & user-specific settings,
    which override the defaults.
    """
    with pkg_resources.resource_stream(__name__, 'defaults.yaml') as defaults:
        settings = update_config(defaults, {})
    if os.path.isfile(user_conf_path):
        with open(user_conf_path, 'r') as user_params:
            settings = update_config(user_params, settings)
    return settings


def read_custom_config(config_file, section=None):
    """Read settings from a user-provided YAML file.

    :param config_file: path to the YAML file
    :param section: if given, the file is merged over this section of the
        user configuration, so it only needs to list what it changes
    """
    base = {} if section is None else read_user_config().get(section, {})
    with open(config_file) as config:
        return update_config(config, base)


def update_config(stream, base_settings):
    """Read a single YAML configuration file.

    :param stream: the open file object.
    :param base_settings: a settings dictionary to copy and update
    with the contents of this file.
    """
    yaml_reader = YAML(typ='safe')
    parsed_yaml_data = yaml_reader.load(stream)
    settings = recursive_dict_update({}, base_settings)
    if parsed_yaml_data is not None:  # if the streamed file is not empty
        if not isinstance(parsed_yaml_data, collections.abc.Mapping):
            raise ValueError('Expected a mapping at the top of {}, got {}'.format(
                getattr(stream, 'name', 'the configuration'), type(parsed_yaml_data).__name__))
        recursive_dict_update(settings, strip_strings(parsed_yaml_data))
    return settings


def recursive_dict_update(base_settings, new_settings):
    """Recursively update settings dictionaries.

    Since our settings are nested dictionaries, we need to merge sub-levels rather
    than overwriting when merging new settings. This method essentially does a
    recursive base_settings.update(new_settings).

    >>> recursive_dict_update({'a': {'b': 1, 'c': 2}}, {'a': {'c': 3}})
    {'a': {'b': 1, 'c': 3}}
    """
    for k, v in new_settings.items():
        if isinstance(v, collections.abc.Mapping):
            base_settings[k] = recursive_dict_update(dict(base_settings.get(k, {})), v)
        else:
            base_settings[k] = new_settings[k]
    return base_settings


def strip_strings(settings):
    """Recursively strip all strings in a settings dict.

    :param settings: the settings dictionary to process
    :returns: a new dictionary with all string settings stripped
    """
    result = {}
    for k, v in settings.items():
        if isinstance(v, str):
            result[k] = v.strip()
        elif isinstance(v, collections.abc.Mapping):
            result[k] = strip_strings(v)
        else:
            result[k] = v
    return result
