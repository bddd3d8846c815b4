#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Manuals:
* https://setuptools.readthedocs.io/en/latest/setuptools.html
* https://packaging.python.org/en/latest/tutorials/packaging-projects/
"""
import io
import os

from setuptools import find_packages, setup

# Package meta-data.
NAME = 'kern-sgg'
DESCRIPTION = 'Scene graph generation with statistical priors routed through gated graph networks, ' \
              'trained and evaluated on numpy.'
REQUIRES_PYTHON = '>=3.8.0'

# What packages are required for this module to be executed?
REQUIRED = [
    "jsonschema >=2.5.1,<5.0",
    "numpy >=1.22,<3.0",
    "python-dateutil >=2.6.0",
    "pytz >= 2021.1",
    "tzlocal >=2.1,<6.0",
    "loguru >=0.7.2,<0.8.0",
]

EXTRAS = {
    "tests": ["parameterized >=0.8.1"],
}

here = os.path.abspath(os.path.dirname(__file__))

# Read version
with io.open(os.path.join(here, 'version'), encoding='ascii') as f:
    version = f.read().strip()

# Import the README and use it as the long-description.
with io.open(os.path.join(here, 'readme.md'), encoding='utf-8') as f:
    long_description = '\n' + f.read()

# Entry points
ENTRY_POINTS = {
    "console_scripts": [
        "kern-sgg = kern_cli:start_cli",
    ],
}

setup(
    name=NAME,
    version=version,
    description=DESCRIPTION,
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires=REQUIRES_PYTHON,
    packages=find_packages(exclude=["tests", "*.tests", "*.tests.*", "tests.*"]),
    include_package_data=True,
    install_requires=REQUIRED,
    extras_require=EXTRAS,
    entry_points=ENTRY_POINTS,
    license='GPLv3',
    classifiers=[
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ]
)
