import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from perturbchain import ReferenceModel, generate_synthetic
from perturbchain.perturb import ParamBounds, default_registry


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def hard_bounds(registry):
    return ParamBounds.hard(registry)


@pytest.fixture(scope="session")
def scene():
    """One synthetic (image, mask) pair shared by perturbation tests."""
    item = generate_synthetic(1, seed=11).items[0]
    return item.image, item.mask


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(8, seed=21, width=48, height=32)


@pytest.fixture(scope="session")
def reference_model():
    return ReferenceModel()


def random_probmap(rng: np.random.Generator, h: int, w: int):
    return rng.random((h, w)).astype(np.float32)
