import logging
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

from src.core.errors import DomainError, PositivityError, first_bad_index
from src.core.params import SimParams

if TYPE_CHECKING:
    from src.core.state import ConservedField

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _squared_norm(vec: Union[Sequence[ArrayLike], np.ndarray]) -> ArrayLike:
    comps = np.asarray(vec, dtype=float)
    if comps.ndim == 0:
        return comps * comps
    total = comps[0] * comps[0]
    for c in comps[1:]:
        total = total + c * c
    return total


def _require_positive(name: str, value: ArrayLike) -> None:
    bad = ~(np.asarray(value) > 0.0)
    if np.any(bad):
        raise DomainError(f"{name} must be positive (first offending index {first_bad_index(bad)})")


def eos_total_energy(rho: ArrayLike, u: Union[Sequence[ArrayLike], np.ndarray], p: ArrayLike,
                     params: SimParams) -> ArrayLike:
    """
    Total non-gravitational energy E = eps^2 rho |u|^2 / 2 + p / (gamma - 1).

    Args:
        rho: Density (scalar or field)
        u: Velocity, a scalar in 1D or a sequence of components
        p: Pressure
        params: Simulation parameters supplying eps and gamma

    Returns:
        Total energy with the shape of ``rho``

    Raises:
        DomainError: If rho or p is not positive
    """
    _require_positive("density", rho)
    _require_positive("pressure", p)
    return 0.5 * params.eps2 * rho * _squared_norm(u) + p / (params.gamma - 1.0)


def eos_pressure(rho: ArrayLike, q: Union[Sequence[ArrayLike], np.ndarray], E: ArrayLike,
                 params: SimParams) -> ArrayLike:
    """
    Pressure p = (gamma - 1)(E - eps^2 |q|^2 / (2 rho)).

    Raises:
        DomainError: If rho is not positive
        PositivityError: If the resulting pressure is not positive
    """
    _require_positive("density", rho)
    p = (params.gamma - 1.0) * (E - 0.5 * params.eps2 * _squared_norm(q) / rho)
    bad = ~(np.asarray(p) > 0.0)
    if np.any(bad):
        raise PositivityError("Nonpositive pressure", first_bad_index(bad))
    return p


def potential_temperature(rho: ArrayLike, p: ArrayLike, gamma: float) -> ArrayLike:
    """theta defined through p = (rho theta)^gamma."""
    _require_positive("density", rho)
    _require_positive("pressure", p)
    return np.power(p, 1.0 / gamma) / rho


def sound_speed(rho: ArrayLike, p: ArrayLike, gamma: float) -> ArrayLike:
    return np.sqrt(gamma * p / rho)


def max_signal_speed(state: "ConservedField", params: SimParams) -> float:
    """
    Global Lax-Friedrichs coefficient max(|u| + min(1, 1/eps) c) over interior nodes.

    The scaling factor is exactly 1.0 for every eps <= 1, so the result does not
    depend on eps in that range.
    """
    rho, q, E = state.interior_conserved()
    p = eos_pressure(rho, q, E, params)
    speed = np.sqrt(_squared_norm(q / rho)) + params.viscosity_factor * sound_speed(rho, p, params.gamma)
    return max(float(np.max(speed)), params.eps_floor_visc)
