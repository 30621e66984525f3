import logging
import math
from typing import Dict, Mapping, Optional

import numpy as np
import pandas as pd

from src.core.eos import max_signal_speed
from src.core.errors import ConfigurationError
from src.core.params import SimParams
from src.core.state import ConservedField
from src.cases.scenarios import Scenario, initial_state
from src.stencil.characteristic import prebalanced_state
from src.stencil.operators import div_w
from src.stencil.weno import WenoConfig

logger = logging.getLogger(__name__)


def component_names(dim: int) -> list:
    """Names of the stored components in array order."""
    momentum = ["qx", "qy"][:dim]
    return ["rho", *momentum, "E", "theta2"]


def exact_solution(scenario: Scenario, t: float) -> Optional[ConservedField]:
    """
    Exact state at time ``t``, or None for cases without a known solution.

    Only steady cases have one, so the result is the initial state for every t.
    """
    if t < 0.0:
        raise ConfigurationError(f"Time must be >= 0, got {t}")
    if not scenario.steady:
        return None
    return initial_state(scenario)


def l1_error(numerical: ConservedField, exact: ConservedField) -> Dict[str, float]:
    """
    Per-variable L1 norm of the difference over interior nodes.

    The sum is formed with ``math.fsum`` so the result does not depend on
    summation order.

    Raises:
        ConfigurationError: If the two states live on different grids
    """
    if numerical.grid != exact.grid:
        raise ConfigurationError(f"Grid mismatch: {numerical.grid} vs {exact.grid}")
    grid = numerical.grid
    diff = np.abs(grid.interior_view(numerical.data) - grid.interior_view(exact.data))
    return {name: grid.cell_volume * math.fsum(diff[k].ravel())
            for k, name in enumerate(component_names(grid.dim))}


def convergence_table(errors: Mapping[int, float]) -> pd.DataFrame:
    """
    Observed orders log2(e_k / e_{k+1}) for errors on a doubling sequence of meshes.

    Args:
        errors: Error per cell count N

    Returns:
        DataFrame with columns N, error, order (NaN on the coarsest row)

    Raises:
        ConfigurationError: If the cell counts do not double from one entry to the next
    """
    ns = sorted(errors)
    for coarse, fine in zip(ns, ns[1:]):
        if fine != 2 * coarse:
            raise ConfigurationError(f"Cell counts must double between refinements, got {coarse} -> {fine}")
    values = [float(errors[n]) for n in ns]
    orders = [math.nan]
    for coarse, fine in zip(values, values[1:]):
        orders.append(math.log2(coarse / fine) if coarse > 0.0 and fine > 0.0 else math.nan)
    return pd.DataFrame({"N": ns, "error": values, "order": orders})


def _divergence(flux: np.ndarray, viscosity: np.ndarray, lam: float, state: ConservedField,
                weno: WenoConfig) -> np.ndarray:
    grid = state.grid
    return div_w([flux[k][None] for k in range(grid.dim)], viscosity[None], lam, grid, weno)[0]


def diagnostics(state: ConservedField, scenario: Scenario, weno: Optional[WenoConfig] = None,
                params: Optional[SimParams] = None) -> Dict[str, float]:
    """
    Scalar health indicators of a state with filled ghost layers.

    Returns:
        Record with the discrete divergence of q and of rho0 u, the deviations of p
        (and of the Exner pressure for atmospheric cases) from the background,
        extrema of theta - theta0 (also in Kelvin when reference scales exist),
        total mass and energy and the current Lax-Friedrichs coefficient
    """
    grid = state.grid
    params = params or scenario.params
    weno = weno or WenoConfig(weights_mode=params.weights_mode)
    bg = scenario.hydro.sample(grid, scenario.boundary.periodic_axes(grid.dim))

    lam = max_signal_speed(state, params)
    viscosity = prebalanced_state(state.euler, bg)[0]
    div_q = _divergence(state.q, viscosity, lam, state, weno)
    div_rho0_u = _divergence(bg.rho0 * state.velocity(), viscosity, lam, state, weno)

    rho, _, E = state.interior_conserved()
    p = state.pressure(params, interior=True)
    p0 = grid.interior_view(bg.p0)
    theta2 = grid.interior_view(state.theta2)
    dtheta = params.eps2 * theta2

    record = {
        "div_q_max": float(np.max(np.abs(div_q))),
        "div_rho0_u_max": float(np.max(np.abs(div_rho0_u))),
        "p_dev_max": float(np.max(np.abs(p - p0))),
        "rho_dev_max": float(np.max(np.abs(rho - grid.interior_view(bg.rho0)))),
        "theta2_max": float(np.max(np.abs(theta2))),
        "dtheta_min": float(np.min(dtheta)),
        "dtheta_max": float(np.max(dtheta)),
        "mass": grid.cell_volume * math.fsum(rho.ravel()),
        "energy": grid.cell_volume * math.fsum(E.ravel()),
        "lambda": lam,
    }
    if scenario.scales is not None:
        kappa = (params.gamma - 1.0) / params.gamma
        record["exner_dev_max"] = float(np.max(np.abs(np.power(p, kappa) - np.power(p0, kappa))))
        record["dtheta_min_K"] = float(scenario.scales.to_dimensional_theta(record["dtheta_min"]))
        record["dtheta_max_K"] = float(scenario.scales.to_dimensional_theta(record["dtheta_max"]))
    return record
