import numpy as np
import pytest

from ghostlab import DistributionSpec, ImageGrid, gen_random_basis


@pytest.fixture
def uniform_centered():
    return DistributionSpec.uniform(-0.5, 0.5, zero_centered=True)


@pytest.fixture
def gaussian_unit():
    return DistributionSpec.gaussian(0.0, 1.0)


@pytest.fixture
def textured_16():
    """A 16x16 target with structure at several scales."""
    return make_texture(16, 16)


def make_texture(n, m, pitch=1.0):
    yy, xx = np.indices((n, m))
    data = (0.6 * ((yy // 4 + xx // 4) % 2)
            + 0.3 * np.sin(2 * np.pi * xx / m) * np.cos(2 * np.pi * yy / n)
            + 0.4)
    return ImageGrid(data / data.max() * 0.95, pitch)


@pytest.fixture
def small_basis(uniform_centered):
    return gen_random_basis(8, 8, 32, uniform_centered, seed=11)
