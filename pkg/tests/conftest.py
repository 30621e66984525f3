import numpy as np
import pytest

from src.cases.scenarios import build_case, initial_state
from src.core.grid import Grid
from src.core.params import SimParams
from src.integrator.context import SolverContext


@pytest.fixture
def grid1d():
    return Grid(0.0, 1.0, 16)


@pytest.fixture
def grid2d():
    return Grid(0.0, 1.0, 8, 0.0, 2.0, 6)


@pytest.fixture
def params():
    return SimParams(eps=0.5)


def _context_for(scenario, **kwargs):
    return SolverContext(scenario.grid, scenario.hydro, scenario.params, scenario.boundary, **kwargs)


@pytest.fixture
def isothermal():
    """Small unperturbed isothermal equilibrium, its context and initial state."""
    scenario = build_case("isothermal", nx=12, ny=12)
    state = initial_state(scenario)
    return scenario, _context_for(scenario), state


@pytest.fixture
def accuracy1d():
    scenario = build_case("accuracy1d", nx=32, eps=1e-2)
    state = initial_state(scenario)
    return scenario, _context_for(scenario), state


@pytest.fixture
def vortex():
    """Coarse traveling vortex: periodic in both axes over a nonuniform background."""
    scenario = build_case("vortex", nx=16, ny=8)
    state = initial_state(scenario)
    return scenario, _context_for(scenario), state


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_context():
    return _context_for
