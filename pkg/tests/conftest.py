import os

import pytest
from hypothesis import HealthCheck, settings

from ddmatom.scf import ScfConfig, scf_solve

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_solves = {}


def solved(N, Z, B, **cfg):
    """Session-wide memo of converged solves, keyed by parameters and config overrides."""
    key = (N, Z, B, tuple(sorted(cfg.items())))
    if key not in _solves:
        _solves[key] = scf_solve(N, Z, B, ScfConfig(**cfg))
    return _solves[key]


@pytest.fixture(scope="session")
def solve():
    return solved


_studies = {}


def studied(lam, Z, etas):
    """Session-wide memo of hyper-strong convergence sweeps."""
    from ddmatom.hyperstrong import hs_convergence_study

    key = (lam, Z, tuple(etas))
    if key not in _studies:
        _studies[key] = hs_convergence_study(lam, Z, etas)
    return _studies[key]


@pytest.fixture(scope="session")
def study():
    return studied


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
