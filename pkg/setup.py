"""
# This will not be included in the distribution.
# The distribution is managed by poetry
# This file is kept only for
# 1. Github to index the dependents
# 2. pip install -e .
"""

from setuptools import setup

setup(name="hspr")
