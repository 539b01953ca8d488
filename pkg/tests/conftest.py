import pytest
from hypothesis import settings

from orbitdim import models
from orbitdim.thermo import GibbsModel, spectrum

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

Q_GRID = [-5 + 0.25 * i for i in range(41)]


@pytest.fixture(scope="session")
def bernoulli():
    return models.bernoulli()


@pytest.fixture(scope="session")
def bernoulli_model(bernoulli):
    return GibbsModel(*bernoulli)


@pytest.fixture(scope="session")
def bernoulli_curve(bernoulli):
    return spectrum(*bernoulli, Q_GRID)


@pytest.fixture(scope="session")
def lebesgue_doubling():
    m = models.doubling()
    return m, models.lebesgue(m)


@pytest.fixture(scope="session")
def lebesgue_model(lebesgue_doubling):
    return GibbsModel(*lebesgue_doubling)


@pytest.fixture(scope="session")
def lebesgue_curve(lebesgue_doubling):
    return spectrum(*lebesgue_doubling, Q_GRID)


@pytest.fixture(scope="session")
def markov3_model():
    return GibbsModel(*models.markov3_potential())


@pytest.fixture(scope="session")
def shipped():
    return models.shipped_models()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((v for k, v in sys.modules.items() if k.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
