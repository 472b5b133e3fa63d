import numpy as np
import pytest

from conformal_sets.fixtures import fixture_path


def random_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    """Simplex vectors drawn independently of the package's own sampler."""
    return rng.dirichlet(np.ones(4), size=n)


@pytest.fixture
def threshold_demo_path():
    return fixture_path("threshold_demo.jsonl")


@pytest.fixture
def demo_small_path():
    return fixture_path("demo_small.jsonl")


@pytest.fixture
def synthetic_mixed_path():
    return fixture_path("synthetic_mixed.jsonl")
