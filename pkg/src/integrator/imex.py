import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.boundary.ghosts import fill_ghosts, fill_momentum_ghosts
from src.core.eos import eos_pressure, max_signal_speed
from src.core.errors import DomainError, PositivityError, SolverError, StateError
from src.core.state import ConservedField, PerturbationField, perturbation_extract
from src.elliptic.helmholtz import EllipticSolveError, assemble_helmholtz, p2_from_rho2, solve_rho2
from src.integrator.context import SolverContext
from src.integrator.spatial import enthalpy_flux, explicit_operator, implicit_operator
from src.integrator.tableau import ButcherPair
from src.stencil.characteristic import NumericalStateError, prebalanced_state
from src.stencil.operators import div_w

logger = logging.getLogger(__name__)

STEP_FAILURES = (PositivityError, DomainError, StateError, NumericalStateError, EllipticSolveError)
FINAL_STAGE_TOLERANCE = 1e-12


class StepError(SolverError):
    """Custom exception for a time step that could not be completed."""

    def __init__(self, message: str, step: Optional[int] = None, time: Optional[float] = None):
        self.step = step
        self.time = time
        super().__init__(message)


@dataclass
class StageWork:
    """Stage states and operator evaluations of one IMEX Runge-Kutta step."""
    pair: ButcherPair
    base: ConservedField
    dt: float
    ctx: SolverContext
    explicit_states: List[Optional[ConservedField]] = field(default_factory=list)
    implicit_states: List[Optional[ConservedField]] = field(default_factory=list)
    star_states: List[Optional[np.ndarray]] = field(default_factory=list)
    H: List[Optional[np.ndarray]] = field(default_factory=list)
    star_star_states: List[Optional[np.ndarray]] = field(default_factory=list)
    rho_sss: List[Optional[np.ndarray]] = field(default_factory=list)
    perturbation: Optional[PerturbationField] = None

    def __post_init__(self):
        s = self.pair.stages
        for name in ("explicit_states", "implicit_states", "star_states", "star_star_states", "H", "rho_sss"):
            setattr(self, name, [None] * s)
        if self.perturbation is None:
            self.perturbation = self.base.perturbation

    def _check(self, i: int) -> None:
        if not 0 <= i < self.pair.stages:
            raise IndexError(f"Stage index {i} outside 0..{self.pair.stages - 1}")

    def combine(self, coeffs: np.ndarray, upto: int) -> np.ndarray:
        """Interior base state plus dt * sum_{j < upto} coeffs[j] H^(j)."""
        grid = self.base.grid
        out = grid.interior_view(self.base.data).copy()
        for j in range(upto):
            if coeffs[j] != 0.0:
                if self.H[j] is None:
                    raise SolverError(f"Operator evaluation of stage {j} is missing")
                out += self.dt * coeffs[j] * self.H[j]
        return out


def state_from_interior(template: ConservedField, interior: np.ndarray, ctx: SolverContext,
                        perturbation: Optional[PerturbationField] = None) -> ConservedField:
    """Copy of ``template`` with new interior values and freshly filled ghosts."""
    data = template.data.copy()
    data[(Ellipsis,) + ctx.grid.interior] = interior
    state = ConservedField(template.grid, data, perturbation)
    return fill_ghosts(state, ctx.boundary, ctx.hydro)


def explicit_stage(work: StageWork, i: int, dt: Optional[float] = None) -> ConservedField:
    """
    U_E^(i) = U^n + dt sum_{j<i} A_ex[i, j] H^(j), ghosts filled.
    """
    work._check(i)
    if dt is not None:
        work.dt = dt
    if i == 0:
        state = work.base
    else:
        state = state_from_interior(work.base, work.combine(work.pair.A_ex[i], i), work.ctx, work.perturbation)
    work.explicit_states[i] = state
    return state


def implicit_solve(U_E: ConservedField, star: np.ndarray, tau: float, lam: float, H_E: np.ndarray,
                   ctx: SolverContext) -> Tuple[ConservedField, np.ndarray, PerturbationField, np.ndarray]:
    """
    Sequential implicit update from the star state with diagonal step tau.

    Order: explicit increment, rho_sss, rho2 solve, p2, q, rho, E; theta2 keeps its
    explicitly updated value.

    Returns:
        (U_I, implicit part of the operator, perturbations of U_I, rho_sss)
    """
    grid, params, bg = ctx.grid, ctx.params, ctx.background
    dim = grid.dim
    weight = params.implicit_weight

    ss = state_from_interior(U_E, star + tau * H_E, ctx)
    V = prebalanced_state(U_E.euler, bg)
    div_q_ss = div_w([ss.q[k][None] for k in range(dim)], V[0][None], lam, grid, ctx.weno)[0]
    rho_sss = grid.interior_view(ss.rho) - tau * weight * div_q_ss - grid.interior_view(bg.rho0)

    system = assemble_helmholtz(rho_sss, ss.theta2, bg, tau, params, ctx.boundary, grid)
    rho2 = system.extend(solve_rho2(system, params))
    ctx.stats.elliptic_solves += 1
    ctx.stats.elliptic_iterations += system.iterations
    p2 = p2_from_rho2(rho2, ss.theta2, bg, params)
    pert = PerturbationField(rho2, p2, ss.theta2.copy())

    implicit = np.zeros((dim + 3,) + grid.counts)
    data = ss.data.copy()

    grad_p2 = div_w([_pressure_flux(p2, k, dim, grid) for k in range(dim)], V[1:1 + dim], lam, grid, ctx.weno)
    momentum = grad_p2 + grid.interior_view(rho2) * grid.interior_view(bg.grad_phi)
    implicit[1:1 + dim] = -weight * momentum
    data[(slice(1, 1 + dim),) + grid.interior] = grid.interior_view(ss.q) + tau * implicit[1:1 + dim]
    fill_momentum_ghosts(data[1:1 + dim], grid, ctx.boundary)

    q_I = data[1:1 + dim]
    div_q = div_w([q_I[k][None] for k in range(dim)], V[0][None], lam, grid, ctx.weno)[0]
    implicit[0] = -weight * div_q
    data[(0,) + grid.interior] = grid.interior_view(ss.rho) + tau * implicit[0]

    div_hq = div_w([f[None] for f in enthalpy_flux(q_I, pert, ctx)], V[1 + dim][None], lam, grid, ctx.weno)[0]
    gravity_work = np.sum(grid.interior_view(q_I) * grid.interior_view(bg.grad_phi), axis=0)
    implicit[1 + dim] = -weight * (div_hq + gravity_work)
    data[(1 + dim,) + grid.interior] = grid.interior_view(ss.E) + tau * implicit[1 + dim]

    U_I = ConservedField(grid, data, pert)
    fill_ghosts(U_I, ctx.boundary, ctx.hydro)
    return U_I, implicit, pert, rho_sss


def _pressure_flux(p2: np.ndarray, axis: int, dim: int, grid) -> np.ndarray:
    F = np.zeros((dim,) + grid.shape)
    F[axis] = p2
    return F


def implicit_stage(work: StageWork, i: int, dt: Optional[float] = None) -> ConservedField:
    """
    Implicit stage state U_I^(i) and the stored operator evaluation H^(i).

    With a zero diagonal coefficient or no implicit coupling the state is the star
    state plus the explicit increment, and no elliptic solve happens.
    """
    work._check(i)
    if dt is not None:
        work.dt = dt
    ctx = work.ctx
    params = ctx.params
    U_E = work.explicit_states[i]
    if U_E is None:
        raise SolverError(f"Explicit state of stage {i} must be computed first")

    star = work.combine(work.pair.A[i], i)
    work.star_states[i] = star
    tau = work.dt * work.pair.A[i, i]
    lam = max_signal_speed(U_E, params)
    H_E = explicit_operator(U_E, ctx, lam)

    if tau != 0.0 and not params.fully_explicit:
        U_I, implicit, pert, rho_sss = implicit_solve(U_E, star, tau, lam, H_E, ctx)
        work.perturbation = pert
        work.rho_sss[i] = rho_sss
    else:
        U_I = state_from_interior(U_E, star + tau * H_E, ctx, work.perturbation)
        pert = None
        if not params.fully_explicit:
            pert = work.perturbation
            if pert is None:
                pert = perturbation_extract(U_I, ctx.hydro, params, ctx.periodic_axes)
        implicit = implicit_operator(U_I, pert, U_E, lam, ctx)

    work.star_star_states[i] = star + tau * H_E
    work.implicit_states[i] = U_I
    work.H[i] = H_E + implicit
    return U_I


def advance_step(state: ConservedField, dt: float, pair: ButcherPair, ctx: SolverContext) -> ConservedField:
    """
    One IMEX Runge-Kutta step U^{n+1} = U^n + dt sum_i b_i H(U_E^(i), U_I^(i)).

    ``state`` must have its ghost layers filled. The perturbations of the last
    elliptic solve travel with the returned state.

    Raises:
        StepError: On positivity loss, an invalid interface state or a failed solve
    """
    if dt == 0.0:
        return state.copy()
    work = StageWork(pair, state, dt, ctx)
    try:
        for i in range(pair.stages):
            explicit_stage(work, i)
            implicit_stage(work, i)
        new = state_from_interior(state, work.combine(pair.b, pair.stages), ctx, work.perturbation)
        rho, q, E = new.interior_conserved()
        eos_pressure(rho, q, E, ctx.params)
    except STEP_FAILURES as e:
        raise StepError(f"Step with dt={dt:.6g} failed: {e}") from e
    if pair.stiffly_accurate and not ctx.params.fully_explicit:
        check_final_stage(new, work.implicit_states[-1], dt)
    ctx.stats.steps += 1
    return new


def check_final_stage(new: ConservedField, last: ConservedField, dt: float) -> None:
    """
    A stiffly accurate pair must reproduce its last implicit stage.

    Raises:
        StepError: If the interiors differ by more than FINAL_STAGE_TOLERANCE relative to the state scale
    """
    grid = new.grid
    interior = grid.interior_view(new.data)
    gap = float(np.max(np.abs(interior - grid.interior_view(last.data))))
    scale = max(1.0, float(np.max(np.abs(interior))))
    logger.debug(f"Final combination differs from the last stage by {gap:.3e}")
    if not gap <= FINAL_STAGE_TOLERANCE * scale:
        raise StepError(f"Step with dt={dt:.6g} left the last implicit stage by {gap:.3e}")


def first_order_step(state: ConservedField, dt: float, ctx: SolverContext) -> ConservedField:
    """
    First-order semi-implicit step.

    Explicit tilde states and theta2 at the new level come from the explicit
    operator at U^n; rho2 follows from the elliptic equation, p2 from its
    linearized closure, and q, rho, E are updated in that order.

    Raises:
        StepError: On positivity loss, an invalid interface state or a failed solve
    """
    params = ctx.params
    try:
        lam = max_signal_speed(state, params)
        H_E = explicit_operator(state, ctx, lam)
        star = ctx.grid.interior_view(state.data)
        if params.fully_explicit or dt == 0.0:
            new = state_from_interior(state, star + dt * H_E, ctx, state.perturbation)
        else:
            new, _, _, _ = implicit_solve(state, star, dt, lam, H_E, ctx)
        rho, q, E = new.interior_conserved()
        eos_pressure(rho, q, E, params)
    except STEP_FAILURES as e:
        raise StepError(f"First-order step with dt={dt:.6g} failed: {e}") from e
    ctx.stats.steps += 1
    return new
