import os

import pytest
from hypothesis import HealthCheck, settings

from gridflow.case_io import load_case

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def net30():
    return load_case("case30")


@pytest.fixture(scope="session")
def net118():
    return load_case("case118")


@pytest.fixture(scope="session")
def small30(net30):
    """2000-sample IEEE-30 dataset (1200/400/400) from the bundled Gaussian recipe."""
    from gridflow.config import load_config
    from gridflow.ppf.dataset import generate_dataset

    cfg = load_config("ieee30_gauss")
    return generate_dataset(net30, cfg.scenario_spec(2000, seed_offset=101), (1200, 400, 400))
