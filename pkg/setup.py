#!/usr/bin/env python
# -*- encoding: utf-8 -*-
import io
import re
from os.path import dirname, join

from setuptools import find_packages, setup


def read(*names, **kwargs):
    with io.open(
        join(dirname(__file__), *names),
        encoding=kwargs.get('encoding', 'utf8')
    ) as fh:
        return fh.read()


setup(
    name='cloudletopt',
    version='0.1.0',
    license='MIT license',
    description='Planning cloudlet placement and service assignment over time in metropolitan edge networks',
    long_description='%s\n%s' % (
        re.compile('^.. start-badges.*^.. end-badges', re.M | re.S).sub('', read('README.rst')),
        re.sub(':[a-z]+:`~?(.*?)`', r'``\1``', read('CHANGELOG.rst'))
    ),
    author='cloudletopt developers',
    packages=find_packages('src'),
    package_dir={'': 'src'},
    package_data={'cloudletopt': ['defaults.yaml']},
    include_package_data=True,
    zip_safe=False,
    classifiers=[
        # complete classifier list: http://pypi.python.org/pypi?%3Aaction=list_classifiers
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: Unix',
        'Operating System :: POSIX',
        'Operating System :: Microsoft :: Windows',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: Implementation :: CPython',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    keywords=[
        'edge computing', 'cloudlet', 'facility location', 'branch and bound',
    ],
    python_requires='>=3.8',
    install_requires=[
        'appdirs',
        'matplotlib>=3.1',
        'numpy>=1.17',
        'pandas>=1.5',
        'ruamel.yaml',
        'scipy>=1.6',
    ],
    extras_require={
        'test': ['pytest', 'tox'],
        'mps': ['pulp'],
    },
    entry_points={
        'console_scripts': [
            'cloudletopt = cloudletopt.script:run',
        ],
    },
)
