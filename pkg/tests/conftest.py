import pytest

from core.forge import ForgeConfig
from utils.seeding import make_rng


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture
def fast_config():
    """Monte-Carlo only, small budgets"""
    return ForgeConfig(seed=11, samples=2000, confidence=0.99, n_cap=5, exact_threshold=0, workers=1)
