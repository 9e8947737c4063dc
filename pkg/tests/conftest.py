import os
import sys

import pytest

# Ensure the repository root is in sys.path so we can import the finsler package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from finsler.metrics import catalog, sample_points


@pytest.fixture(scope="session")
def flat():
    return catalog('euclidean')


@pytest.fixture(scope="session")
def sphere2():
    return catalog('sphere')


@pytest.fixture(scope="session")
def hyperbolic2():
    return catalog('hyperbolic')


@pytest.fixture(scope="session")
def funk2():
    return catalog('funk')


@pytest.fixture(scope="session")
def perturbed3():
    """Randers metric with non-closed b in three dimensions."""
    return catalog('perturbed_randers', dimension=3)


@pytest.fixture(scope="session")
def funk_sample(funk2):
    return sample_points(funk2, 6, seed=7)


@pytest.fixture(scope="session")
def sphere_sample(sphere2):
    return sample_points(sphere2, 6, seed=11)
