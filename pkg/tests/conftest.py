import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("suite", deadline=None, max_examples=25)
settings.load_profile("suite")

from hvcm import HvcmParams, InteractionLog, simulate_full


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_log(rng, n=40, multi_sender=False) -> InteractionLog:
    """A small simulated log with mixed arities for structural tests."""
    params = HvcmParams(
        sender_alpha=0.3,
        sender_theta=2.0,
        alpha=0.5,
        theta=4.0,
        local_default=(0.4, 1.5),
        size_dist={1: 0.6, 2: 0.3, 3: 0.1} if multi_sender else None,
        local_size_default={1: 0.5, 2: 0.3, 3: 0.2},
    )
    return simulate_full(n, params, rng).log


@pytest.fixture
def small_log(rng):
    return random_log(rng)
