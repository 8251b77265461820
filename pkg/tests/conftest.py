import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hybridloc.dictionary import build_dictionary
from hybridloc.geometry import RisConfig

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ris10():
    """10x10 panel, 0.06 m wavelength, half-wavelength spacing."""
    return RisConfig(10, 10, 0.03, 0.06)


@pytest.fixture(scope="session")
def ris4():
    return RisConfig(4, 4, 0.03, 0.06)


@pytest.fixture(scope="session")
def hybrid10(ris10):
    return build_dictionary(ris10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter):
    from .helpers import ACCEPTANCE_RESULTS

    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
