"""Shared fixtures: bundled reference grids, cached synthesis results, and
random-grid generators used by the property and acceptance tests.

The simulation fixtures are session-scoped because the two bundled runs
cost tens of seconds; every consumer works on the same immutable trace.
"""

import importlib.resources
import time

import numpy as np
import pytest

from mgpnp import (GridGraph, DguParams, LineParams, load_grid, synthesize_all)
from mgpnp.sim import load_scenario, resolve_scenario, simulate


def data_path(name: str):
    return importlib.resources.files("mgpnp").joinpath("data", name)


@pytest.fixture(scope="session")
def grid2():
    """Two identical units joined by one line (bundled scenario1 grid)."""
    return load_grid(data_path("scenario1.grid"))


@pytest.fixture(scope="session")
def grid5():
    """Five heterogeneous units in a mesh (bundled scenario2 grid)."""
    return load_grid(data_path("scenario2.grid"))


@pytest.fixture(scope="session")
def gains2(grid2):
    return synthesize_all(grid2)


@pytest.fixture(scope="session")
def gains5(grid5):
    return synthesize_all(grid5)


class _Run:
    def __init__(self, grid, scenario, gains, prefilters, compensators, trace,
                 wall):
        self.grid = grid
        self.scenario = scenario
        self.gains = gains
        self.prefilters = prefilters
        self.compensators = compensators
        self.trace = trace
        self.wall = wall


def _run_bundled(name):
    g = load_grid(data_path(name + ".grid"))
    sc = load_scenario(data_path(name + ".scenario"))
    t0 = time.perf_counter()
    gains, pf, comp = resolve_scenario(g, sc)
    trace = simulate(g, gains, pf, comp, scenario=sc)
    wall = time.perf_counter() - t0
    return _Run(g, sc, gains, pf, comp, trace, wall)


@pytest.fixture(scope="session")
def scenario1_run():
    return _run_bundled("scenario1")


@pytest.fixture(scope="session")
def scenario2_run():
    return _run_bundled("scenario2")


# --- randomized model generators ---------------------------------------------------


def random_dgu(rng: np.random.Generator, with_load: bool = True) -> DguParams:
    """Positive constants in the regime the stiffness assumptions target."""
    return DguParams(
        r_t=float(rng.uniform(0.05, 1.0)),
        l_t=float(rng.uniform(1.0e-3, 5.0e-3)),
        c_t=float(rng.uniform(1.0e-3, 5.0e-3)),
        v_dc=100.0,
        load_r=float(rng.uniform(1.0, 50.0)) if with_load else None,
    )


def random_line(rng: np.random.Generator) -> LineParams:
    return LineParams(r=float(rng.uniform(0.02, 0.2)),
                      l=float(rng.uniform(1.0e-6, 5.0e-6)))


def random_grid(rng: np.random.Generator, n: int) -> GridGraph:
    """Connected grid on ids 1..n: a random spanning tree plus extra edges."""
    dgus = {i: random_dgu(rng) for i in range(1, n + 1)}
    lines = {}
    for i in range(2, n + 1):
        j = int(rng.integers(1, i))
        lines[(j, i)] = random_line(rng)
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        a = int(rng.integers(1, n + 1))
        b = int(rng.integers(1, n + 1))
        if a != b and (min(a, b), max(a, b)) not in lines:
            lines[(min(a, b), max(a, b))] = random_line(rng)
    return GridGraph(dgus, lines)
