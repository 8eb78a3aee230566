import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dickecr.model import ModelParams

settings.register_profile("ci", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

# fixed seeds only; nothing in the package itself draws random numbers
RNG_SEED = 20260314


@pytest.fixture
def rng():
    return np.random.default_rng(RNG_SEED)


@pytest.fixture
def small_params():
    return ModelParams(delta=1.0, omega=0.3, lam=0.4, j=1.0, n_max=12)


def random_ket(basis, rng):
    from dickecr.states import Ket

    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return Ket(basis, v / np.linalg.norm(v))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
