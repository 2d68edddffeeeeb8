import numpy as np
import pytest

from blindsr.kernel_space import fit_default_basis
from blindsr.toydata import make_toy_dataset


@pytest.fixture(scope="session")
def basis_s2():
    """Setting-1 scale-2 PCA basis on a reduced sample count (fast, stable)."""
    return fit_default_basis(1, 2, m=10, n_samples=3000, seed=0)


@pytest.fixture(scope="session")
def toy_images():
    """Four 64x64 textured grayscale images."""
    return make_toy_dataset(4, 64, seed=1)


def rng(seed=0):
    return np.random.default_rng(seed)
