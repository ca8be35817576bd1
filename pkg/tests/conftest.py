import numpy as np
import pytest

from dimenet import _kernels
from dimenet.basis import BasisConfig
from dimenet.model import ModelConfig, init_params


@pytest.fixture(params=sorted(_kernels.BACKENDS))
def backend(request):
    return _kernels.BACKENDS[request.param]


@pytest.fixture(scope="session")
def small_config():
    return ModelConfig(F=16, L=2, n_bilinear=4, basis=BasisConfig(c=3.0))


@pytest.fixture(scope="session")
def small_params(small_config):
    return init_params(small_config, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


@pytest.fixture
def record_acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
