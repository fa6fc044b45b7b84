# -*- coding: utf-8 -*-

"""
A setuptools based setup module for ieca-py.

Adapted from
https://packaging.python.org/en/latest/distributing.html
https://github.com/pypa/sampleproject
"""

from setuptools import setup, find_packages
from codecs import open
from os import path

here = path.abspath(path.dirname(__file__))

with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

# Get the version from the source code
with open(path.join(here, 'ieca', 'ieca.py'), encoding='utf-8') as f:
    for l in f.readlines():
        if l.startswith('__version__'):
            __version__ = l.split('"')[1]

setup(
    name='ieca-py',
    version=__version__,
    description='Evolutionary clustering of mixed datasets (iECA*) with benchmarking tools',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',

    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11'
    ],

    keywords='clustering evolutionary levy elbow benchmark',

    packages=find_packages(exclude=['examples', 'examples.*']),

    install_requires=['pandas>=2.2.0', 'numpy>=1.24', 'scipy>=1.10', 'scikit-learn>=1.3',
                      'matplotlib>=3.7'],

    entry_points={
        'console_scripts': ['ieca=ieca.cli:main'],
    },

    include_package_data=True,
)
