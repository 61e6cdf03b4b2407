"""
SchemaBridge mediates queries across autonomous component databases through
an integrated global schema, and keeps that schema current while the
component schemas evolve.
"""

import ast
import os
import re

from setuptools import find_packages, setup

# Cannot use "from schemabridge import get_version" because that would try to
# import the six package which may not be installed yet.
reg = re.compile(r'__version__\s*=\s*(.+)')
with open(os.path.join('schemabridge', '__init__.py')) as f:
    for line in f:
        m = reg.match(line)
        if m:
            version = ast.literal_eval(m.group(1))
            break

REQS_BASE = [
    'six>=1.11',
    'tenacity>=6.0',
    'pyeventsystem<2'
]
REQS_DEV = [
    'tox>=2.1.1',
    'pytest>=6.0',
    'hypothesis>=5.0',
    'coverage>=5.0',
    'sphinx>=1.3.1',
    'flake8>=3.3.0',
    'flake8-import-order>=0.12'
]

setup(
    name='schemabridge',
    version=version,
    description='A mediator over evolving multidatabase federations.',
    long_description=__doc__,
    author='SchemaBridge Developers',
    install_requires=REQS_BASE,
    extras_require={
        'dev': REQS_DEV
    },
    packages=find_packages(exclude=['tests', 'tests.*']),
    entry_points={
        'console_scripts': [
            'schemabridge=schemabridge.cli:run',
        ],
    },
    license='MIT',
    python_requires='>=3.6',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Developers',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Topic :: Database',
        'Topic :: Software Development :: Libraries :: Python Modules',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.6',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: Implementation :: CPython'],
    test_suite="tests"
)
