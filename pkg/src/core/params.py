from dataclasses import dataclass, replace
from enum import Enum

from src.core.errors import ConfigurationError


class WeightsMode(str, Enum):
    NONLINEAR = "nonlinear"
    LINEAR = "linear"


@dataclass(frozen=True)
class SimParams:
    """
    Physical and numerical parameters shared by every solver stage.

    ``unsplit`` switches the explicit operator to the full system (no implicit
    part, pressure scaled by 1/eps^2, acoustic viscosity); it drives the explicit
    reference solver.
    """
    eps: float
    gamma: float = 1.4
    cfl: float = 0.2
    weights_mode: WeightsMode = WeightsMode.NONLINEAR
    # Lower bound on the Lax-Friedrichs coefficient, guards the time step division
    eps_floor_visc: float = 1e-12
    solver_tol: float = 1e-12
    solver_max_iter: int = 500
    unsplit: bool = False

    def __post_init__(self):
        if not self.eps >= 0.0:
            raise ConfigurationError(f"Mach number eps must be >= 0, got {self.eps}")
        if not self.gamma > 1.0:
            raise ConfigurationError(f"Adiabatic index must exceed 1, got {self.gamma}")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigurationError(f"CFL must lie in (0, 1], got {self.cfl}")
        if self.solver_tol <= 0.0 or self.solver_max_iter <= 0:
            raise ConfigurationError("Solver tolerance and iteration cap must be positive")
        if self.unsplit and self.eps == 0.0:
            raise ConfigurationError("The unsplit explicit system is undefined at eps = 0")
        object.__setattr__(self, "weights_mode", WeightsMode(self.weights_mode))

    @property
    def eps2(self) -> float:
        return self.eps * self.eps

    @property
    def alpha(self) -> float:
        """Splitting parameter min(eps^2, 1)."""
        if self.unsplit:
            return 1.0
        return min(self.eps2, 1.0)

    @property
    def implicit_weight(self) -> float:
        """1 - alpha; zero when the scheme runs fully explicitly."""
        return 1.0 - self.alpha

    @property
    def pressure_scale(self) -> float:
        """alpha / eps^2: 1 for eps <= 1 (including its eps -> 0 limit), 1/eps^2 above."""
        if self.unsplit or self.eps > 1.0:
            return 1.0 / self.eps2
        return 1.0

    @property
    def viscosity_factor(self) -> float:
        """min(1, 1/eps), defined as 1 at eps = 0; 1/eps for the unsplit system."""
        if self.unsplit or self.eps > 1.0:
            return 1.0 / self.eps
        return 1.0

    @property
    def fully_explicit(self) -> bool:
        return self.implicit_weight == 0.0

    def with_overrides(self, **changes) -> "SimParams":
        return replace(self, **changes)
