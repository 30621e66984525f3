import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.eos import max_signal_speed
from src.core.errors import ConfigurationError
from src.core.grid import Grid
from src.core.params import SimParams
from src.core.state import ConservedField, PerturbationField
from src.integrator.context import SolverContext
from src.stencil.characteristic import div_cw_wb, prebalanced_state
from src.stencil.operators import div_w, grad_uw

logger = logging.getLogger(__name__)


@dataclass
class OperatorSplit:
    """Explicit and implicit contributions of the spatial operator on interior nodes."""
    explicit: np.ndarray
    implicit: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.explicit + self.implicit


def compute_dt(state: ConservedField, grid: Grid, params: SimParams) -> float:
    """
    CFL time step dt = CFL min(dx, dy) / Lambda.

    Lambda does not depend on eps for eps <= 1, so neither does dt.
    """
    return params.cfl * min(grid.spacings) / max_signal_speed(state, params)


def _gravity_dot(vec: np.ndarray, ctx: SolverContext) -> np.ndarray:
    grid = ctx.grid
    grad_phi = grid.interior_view(ctx.background.grad_phi)
    return np.sum(grid.interior_view(vec) * grad_phi, axis=0)


def explicit_operator(U_E: ConservedField, ctx: SolverContext, lam: float) -> np.ndarray:
    """
    Explicitly treated part of the right-hand side at the explicit stage state.

    Mass and energy carry the weight alpha; momentum is the well-balanced flux
    divergence minus the matching gravity source. theta2 is advected upwind and
    picks up (1/eps^2) u . grad(theta0) when the background theta0 varies.

    Raises:
        ConfigurationError: If eps = 0 with a nonconstant theta0
    """
    grid, params, bg = ctx.grid, ctx.params, ctx.background
    dim = grid.dim
    div, src = div_cw_wb(U_E.euler, bg, lam, grid, params, ctx.weno)
    residual = div - src

    out = np.empty((dim + 3,) + grid.counts)
    out[0] = -params.alpha * residual[0]
    out[1:1 + dim] = -residual[1:1 + dim]
    out[1 + dim] = -params.alpha * (residual[1 + dim] + _gravity_dot(U_E.q, ctx))

    u = U_E.velocity()
    advection = grad_uw(U_E.theta2, u, grid, ctx.weno)
    if not bg.theta0_constant:
        if params.eps == 0.0:
            raise ConfigurationError("eps = 0 requires a constant background potential temperature")
        advection = advection + np.sum(grid.interior_view(u * bg.grad_theta0), axis=0) / params.eps2
    out[2 + dim] = -advection
    return out


def enthalpy_flux(q: np.ndarray, pert: PerturbationField, ctx: SolverContext) -> np.ndarray:
    """H q with H = gamma/(gamma-1) p/rho + eps^2 |q|^2 / (2 rho^2), rho and p from the perturbations."""
    params, bg = ctx.params, ctx.background
    rho = bg.rho0 + params.eps2 * pert.rho2
    p = bg.p0 + params.eps2 * pert.p2
    H = params.gamma / (params.gamma - 1.0) * p / rho + 0.5 * params.eps2 * np.sum(q * q, axis=0) / (rho * rho)
    return H * q


def _axis_fluxes(values: np.ndarray) -> list:
    """Per-axis single-component fluxes from a (dim, *shape) vector field."""
    return [values[k][None] for k in range(values.shape[0])]


def implicit_divergences(q: np.ndarray, pert: PerturbationField, V: np.ndarray, lam: float,
                         ctx: SolverContext) -> dict:
    """
    The three implicit terms on interior nodes, each without the (1 - alpha) weight.

    ``V`` is the prebalanced viscosity field of the explicit stage state; ``q`` and
    the perturbations must have their ghost layers filled.
    """
    grid = ctx.grid
    dim = grid.dim
    mass = div_w(_axis_fluxes(q), V[0][None], lam, grid, ctx.weno)[0]

    pressure_fluxes = []
    for k in range(dim):
        Fk = np.zeros((dim,) + grid.shape)
        Fk[k] = pert.p2
        pressure_fluxes.append(Fk)
    grad_p2 = div_w(pressure_fluxes, V[1:1 + dim], lam, grid, ctx.weno)
    rho2 = grid.interior_view(pert.rho2)
    grad_phi = grid.interior_view(ctx.background.grad_phi)
    momentum = grad_p2 + rho2 * grad_phi

    energy = div_w(_axis_fluxes(enthalpy_flux(q, pert, ctx)), V[1 + dim][None], lam, grid, ctx.weno)[0]
    energy = energy + _gravity_dot(q, ctx)
    return {"mass": mass, "momentum": momentum, "energy": energy}


def implicit_operator(U_I: ConservedField, pert: Optional[PerturbationField], U_E: ConservedField,
                      lam: float, ctx: SolverContext) -> np.ndarray:
    """Implicitly treated part of the right-hand side, weighted by 1 - alpha."""
    grid, params = ctx.grid, ctx.params
    dim = grid.dim
    out = np.zeros((dim + 3,) + grid.counts)
    weight = params.implicit_weight
    if weight == 0.0:
        return out
    if pert is None:
        raise ConfigurationError("Implicit terms need (rho2, p2) perturbation fields")
    V = prebalanced_state(U_E.euler, ctx.background)
    terms = implicit_divergences(U_I.q, pert, V, lam, ctx)
    out[0] = -weight * terms["mass"]
    out[1:1 + dim] = -weight * terms["momentum"]
    out[1 + dim] = -weight * terms["energy"]
    return out


def spatial_operator(U_E: ConservedField, U_I: ConservedField, pert_I: Optional[PerturbationField],
                     ctx: SolverContext, lam: Optional[float] = None) -> OperatorSplit:
    """
    Split right-hand side H(U_E, U_I) with the viscosity coefficient taken from U_E.

    Args:
        U_E: Explicit stage state, ghosts filled
        U_I: Implicit stage state, ghosts filled
        pert_I: (rho2, p2) belonging to U_I, ghosts filled (unused when fully explicit)
        ctx: Solver context
        lam: Viscosity coefficient; computed from U_E when omitted

    Returns:
        Explicit and implicit parts on interior nodes
    """
    if lam is None:
        lam = max_signal_speed(U_E, ctx.params)
    return OperatorSplit(explicit_operator(U_E, ctx, lam), implicit_operator(U_I, pert_I, U_E, lam, ctx))
