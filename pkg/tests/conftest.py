import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
