import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.core.eos import eos_pressure, eos_total_energy
from src.core.errors import ConfigurationError, StateError
from src.core.grid import Grid
from src.core.hydrostatic import HydrostaticState
from src.core.params import SimParams

logger = logging.getLogger(__name__)


@dataclass
class PerturbationField:
    """O(eps^2) perturbations about the hydrostatic background, on the extended grid."""
    rho2: np.ndarray
    p2: np.ndarray
    theta2: np.ndarray

    def theta(self, theta0: np.ndarray, params: SimParams) -> np.ndarray:
        """Full potential temperature theta0 + eps^2 theta2."""
        return theta0 + params.eps2 * self.theta2

    def copy(self) -> "PerturbationField":
        return PerturbationField(self.rho2.copy(), self.p2.copy(), self.theta2.copy())


class ConservedField:
    """
    Conserved state (rho, q, E, theta2) stored as one array of shape (dim + 3, *grid.shape).

    Component order is rho, the momentum components, E, theta2. ``perturbation`` holds
    (rho2, p2) from the most recent elliptic solve, when one has happened.
    """

    def __init__(self, grid: Grid, data: np.ndarray,
                 perturbation: Optional[PerturbationField] = None):
        expected = (grid.dim + 3,) + grid.shape
        if data.shape != expected:
            raise ConfigurationError(f"State array has shape {data.shape}, expected {expected}")
        self.grid = grid
        self.data = data
        self.perturbation = perturbation

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def rho(self) -> np.ndarray:
        return self.data[0]

    @property
    def q(self) -> np.ndarray:
        return self.data[1:1 + self.dim]

    @property
    def E(self) -> np.ndarray:
        return self.data[1 + self.dim]

    @property
    def theta2(self) -> np.ndarray:
        return self.data[2 + self.dim]

    @property
    def euler(self) -> np.ndarray:
        """The (rho, q, E) block without theta2."""
        return self.data[:2 + self.dim]

    def interior_conserved(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        inner = self.grid.interior_view(self.data)
        return inner[0], inner[1:1 + self.dim], inner[1 + self.dim]

    def pressure(self, params: SimParams, interior: bool = False) -> np.ndarray:
        if interior:
            rho, q, E = self.interior_conserved()
            return eos_pressure(rho, q, E, params)
        return eos_pressure(self.rho, self.q, self.E, params)

    def velocity(self) -> np.ndarray:
        return self.q / self.rho

    def copy(self) -> "ConservedField":
        pert = self.perturbation.copy() if self.perturbation is not None else None
        return ConservedField(self.grid, self.data.copy(), pert)

    def with_data(self, data: np.ndarray) -> "ConservedField":
        return ConservedField(self.grid, data, self.perturbation)

    @classmethod
    def zeros(cls, grid: Grid) -> "ConservedField":
        return cls(grid, np.zeros((grid.dim + 3,) + grid.shape))

    @classmethod
    def from_primitive(cls, grid: Grid, rho: np.ndarray, u: Sequence[np.ndarray], p: np.ndarray,
                       theta2: np.ndarray, params: SimParams) -> "ConservedField":
        """Build a state from primitive fields given on the extended grid."""
        rho = np.broadcast_to(np.asarray(rho, dtype=float), grid.shape)
        u = [np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in u]
        if len(u) != grid.dim:
            raise ConfigurationError(f"Expected {grid.dim} velocity components, got {len(u)}")
        p = np.broadcast_to(np.asarray(p, dtype=float), grid.shape)
        data = np.empty((grid.dim + 3,) + grid.shape)
        data[0] = rho
        for k, comp in enumerate(u):
            data[1 + k] = rho * comp
        data[1 + grid.dim] = eos_total_energy(rho, u, p, params)
        data[2 + grid.dim] = theta2
        return cls(grid, data)


def perturbation_extract(state: ConservedField, hydro: HydrostaticState, params: SimParams,
                         periodic_axes: Sequence[int] = ()) -> PerturbationField:
    """
    Recover (rho2, p2) from rho = rho0 + eps^2 rho2 and p = p0 + eps^2 p2.

    At eps = 0 the stored theta2 is returned together with (rho2, p2) of the most
    recent elliptic solve.

    Args:
        state: Conserved state on the extended grid
        hydro: Hydrostatic background
        params: Simulation parameters
        periodic_axes: Axes whose background ghost layers wrap periodically

    Returns:
        Perturbation fields on the extended grid

    Raises:
        StateError: If eps = 0 and no elliptic solve has happened yet
    """
    if params.eps == 0.0:
        if state.perturbation is None:
            raise StateError("eps = 0 requires (rho2, p2) from a prior elliptic solve")
        pert = state.perturbation
        return PerturbationField(pert.rho2, pert.p2, state.theta2.copy())
    bg = hydro.sample(state.grid, periodic_axes)
    p = state.pressure(params)
    rho2 = (state.rho - bg.rho0) / params.eps2
    p2 = (p - bg.p0) / params.eps2
    return PerturbationField(rho2, p2, state.theta2.copy())
