import json

import numpy as np
import pytest

from et14.cli import BUNDLED, bundled_path
from et14.closure import (HSTAR_VARS, HSTARSTAR_VARS, KSTAR_VARS, PHI_VARS, PSI_VARS, THETA_VARS,
                          build_compat_family_K, build_compat_family_X, spec_from_json)
from et14.functions import random_polynomial
from et14.state import SamplerConfig, random_states


def x_family(seed, degree=3, n_terms=8, psi=True, phi=True, weights=None):
    """Random polynomial X-form family; either branch can be switched off."""
    rng = np.random.default_rng(seed)
    kw = {} if weights is None else {"weights": weights}
    return build_compat_family_X(
        random_polynomial(PSI_VARS, rng, degree, n_terms) if psi else None,
        [random_polynomial(HSTAR_VARS, rng, degree, n_terms) for _ in range(3)] if psi else None,
        random_polynomial(PHI_VARS, rng, degree, n_terms) if phi else None,
        [random_polynomial(HSTARSTAR_VARS, rng, degree, n_terms) for _ in range(3)] if phi else None,
        **kw)


def k_family(seed, degree=3, n_terms=8, weights=None):
    rng = np.random.default_rng(seed)
    kw = {} if weights is None else {"weights": weights}
    return build_compat_family_K(random_polynomial(THETA_VARS, rng, degree, n_terms),
                                 [random_polynomial(KSTAR_VARS, rng, degree, n_terms) for _ in range(3)], **kw)


def bundled_spec(name):
    with open(bundled_path(name)) as fh:
        return spec_from_json(json.load(fh))


@pytest.fixture(scope="session")
def states():
    return random_states(30, SamplerConfig(), seed=11)


@pytest.fixture(scope="session")
def eta_states():
    return random_states(30, SamplerConfig(require_X1_nonzero=True, eps1=0.1), seed=12)


@pytest.fixture(scope="session")
def bundled_x():
    return [bundled_spec(n) for n in BUNDLED["x"]]


@pytest.fixture(scope="session")
def bundled_eta():
    return [bundled_spec(n) for n in BUNDLED["eta"]]


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    rows = acceptance_log.lines()
    if rows:
        terminalreporter.section("acceptance criteria")
        for row in rows:
            terminalreporter.write_line(row)
