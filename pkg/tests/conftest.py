import numpy as np
import pytest

from augen import BoxPartition, VectorField, double_gyre


@pytest.fixture(scope="session")
def dg_field():
    return double_gyre()


@pytest.fixture(scope="session")
def zero_field_2d():
    return VectorField(lambda t, p: np.zeros_like(p), [[0.0, 2.0], [0.0, 1.0]], 1.0,
                       name="zero")


@pytest.fixture()
def small_partition(dg_field):
    return BoxPartition.for_field(dg_field, (20, 10))
