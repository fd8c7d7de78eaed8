from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture
def tiny_dir():
    return FIXTURES / "tiny"


def random_adjacency(rng, n, p=0.4):
    a = np.triu((rng.random((n, n)) < p).astype(float), 1)
    return a + a.T


def path_adjacency(n):
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1.0
    return a
