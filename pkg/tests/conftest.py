import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

import synth  # noqa: E402

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_snapshot():
    return synth.make_snapshot(300, seed=1)


@pytest.fixture(scope="session")
def medium_snapshot():
    return synth.make_snapshot(2000, seed=2)


@pytest.fixture()
def rng():
    import numpy as np

    return np.random.default_rng(1234)
