import numpy as np
import pytest

from prioq import new_params, solve_truncated

REF = (0.1, 0.1, 0.45, 0.35)
REGIME3 = (0.1, 0.01, 0.45, 0.44)

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def ref():
    return new_params(*REF)


@pytest.fixture(scope="session")
def ref_grid(ref):
    return solve_truncated(ref, 400, 400)


@pytest.fixture(scope="session")
def high_grid(ref):
    return solve_truncated(ref, 600, 60)


@pytest.fixture(scope="session")
def regime3():
    return new_params(*REGIME3)


def random_params(rng, n, rho_max=0.98, supported=True):
    """Stable simplex points drawn uniformly, optionally with mu_l <= mu_h."""
    out = []
    while len(out) < n:
        p, q, mh, _ = rng.dirichlet([1.0, 1.0, 1.0, 1.0])
        ml = 1.0 - p - q - mh
        if min(p, q, mh, ml) < 1e-3:
            continue
        params = new_params(p, q, mh, ml)
        if params.rho >= rho_max or (supported and not params.asymptotics_supported):
            continue
        out.append(params)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
