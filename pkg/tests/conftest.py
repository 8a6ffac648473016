import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def pm_spec():
    from qdmaze.envs import make_env
    return make_env("pointmaze")


@pytest.fixture(scope="session")
def am_spec():
    from qdmaze.envs import make_env
    return make_env("antmaze")


@pytest.fixture(scope="session")
def at_spec():
    from qdmaze.envs import make_env
    return make_env("anttrap")
