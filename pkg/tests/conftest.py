import numpy as np
import pytest

from helix import CkksParams, make_backend

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ref_params():
    return CkksParams.default()


@pytest.fixture(scope="session")
def lat_params():
    return CkksParams.default("lattice")


@pytest.fixture(scope="session")
def small_lat_params():
    """N = 2^10 with a short chain: fast enough for many small lattice tests."""
    return CkksParams.generate(ring_degree=1 << 10, max_level=4, backend="lattice")


@pytest.fixture
def ref(ref_params):
    def build(rotations=()):
        return make_backend(ref_params, rotations)

    return build


@pytest.fixture(scope="session")
def lattice(small_lat_params):
    """One shared lattice backend with every rotation key the unit tests need."""
    n = small_lat_params.slot_count
    return make_backend(small_lat_params, rotations=range(1, n), seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
