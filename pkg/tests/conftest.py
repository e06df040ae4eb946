import numpy as np
import pytest

from siegel_green.model import OperatorSpec, PotentialSample, strip_dirichlet


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def free_scalar():
    """m=1, D=0."""
    return OperatorSpec.from_matrix([[0.0]])


@pytest.fixture
def strip_2x1():
    return strip_dirichlet(2, 1)


@pytest.fixture
def zero_q():
    return PotentialSample.zero(1)
