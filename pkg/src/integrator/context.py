from dataclasses import dataclass, field, replace
from typing import Tuple

from src.boundary.ghosts import BoundarySpec
from src.core.errors import ConfigurationError
from src.core.grid import Grid
from src.core.hydrostatic import HydrostaticState, SampledBackground
from src.core.params import SimParams
from src.stencil.weno import WenoConfig


@dataclass
class SolverStats:
    """Counters accumulated over a run and reported in the manifest."""
    steps: int = 0
    elliptic_solves: int = 0
    elliptic_iterations: int = 0


@dataclass
class SolverContext:
    """Everything a step needs besides the state: discretization, background and boundaries."""
    grid: Grid
    hydro: HydrostaticState
    params: SimParams
    boundary: BoundarySpec
    weno: WenoConfig = field(default_factory=WenoConfig)
    stats: SolverStats = field(default_factory=SolverStats)

    def __post_init__(self):
        self.boundary.check_grid(self.grid)
        bg = self.background
        if self.params.eps == 0.0 and not bg.theta0_constant:
            raise ConfigurationError("eps = 0 requires a constant background potential temperature")

    @property
    def background(self) -> SampledBackground:
        """Sampled background, wrapped on periodic axes; cached by ``hydro``."""
        return self.hydro.sample(self.grid, self.periodic_axes)

    @property
    def periodic_axes(self) -> Tuple[int, ...]:
        return self.boundary.periodic_axes(self.grid.dim)

    def with_params(self, params: SimParams) -> "SolverContext":
        """Same discretization with other parameters; statistics are shared."""
        return replace(self, params=params)
