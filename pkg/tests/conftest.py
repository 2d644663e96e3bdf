"""Shared fixtures: ground-state solves are cached across the whole session."""

import pytest

from dpnls import ModelParams, ShootingConfig, solve_ground_state

_CACHE = {}

# deeper tail attachment and a denser grid, for evolution fidelity tests
FINE = {"tail_cut": 1e-6, "grid_core_points": 4000}


def ground_state(dim, p, q, omega, **cfg_kwargs):
    key = (dim, p, q, omega, tuple(sorted(cfg_kwargs.items())))
    if key not in _CACHE:
        params = ModelParams(dim, p, q, omega)
        _CACHE[key] = solve_ground_state(params, ShootingConfig(**cfg_kwargs))
    return _CACHE[key]


@pytest.fixture(scope="session")
def gs():
    return ground_state
