import numpy as np
import pytest

from relayline import MdpConfig, solve

_SOLVE_CACHE = {}


def cached_solve(lam, xi, state_step=0.01, action_step=0.001, **kw):
    """Session-wide memoized MDP solve at beta = 1."""
    cfg = MdpConfig(
        beta=1.0, rho=lam, xi=xi, state_step=state_step, action_step=action_step, **kw
    )
    sol = _SOLVE_CACHE.get(cfg)
    if sol is None:
        sol = solve(cfg)
        _SOLVE_CACHE[cfg] = sol
    return sol


@pytest.fixture(scope="session")
def solve_cached():
    return cached_solve


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0xA11CE)
