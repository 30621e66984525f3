import logging
from typing import Optional

import numpy as np

from src.core.eos import eos_pressure, max_signal_speed
from src.core.state import ConservedField
from src.integrator.context import SolverContext
from src.integrator.imex import STEP_FAILURES, StepError, state_from_interior
from src.integrator.spatial import compute_dt, explicit_operator

logger = logging.getLogger(__name__)

# Relative slack before a step counts as violating the acoustic CFL bound
CFL_SLACK = 1e-12


def reference_context(ctx: SolverContext) -> SolverContext:
    """Context for the unsplit explicit system (pressure scaled by 1/eps^2, acoustic viscosity)."""
    if ctx.params.unsplit:
        return ctx
    return ctx.with_params(ctx.params.with_overrides(unsplit=True))


def reference_rhs(state: ConservedField, ctx: SolverContext, lam: Optional[float] = None) -> np.ndarray:
    """Right-hand side of the full system with the well-balanced characteristic WENO5 divergence."""
    ctx = reference_context(ctx)
    if lam is None:
        lam = max_signal_speed(state, ctx.params)
    return explicit_operator(state, ctx, lam)


def acoustic_dt(state: ConservedField, ctx: SolverContext) -> float:
    """CFL min(dx, dy) / max(|u| + c / eps), the step size limit of the explicit system."""
    ctx = reference_context(ctx)
    return compute_dt(state, ctx.grid, ctx.params)


def reference_explicit_step(state: ConservedField, dt: float, ctx: SolverContext) -> ConservedField:
    """
    One SSP-RK3 step of the unsplit system.

    Args:
        state: State with filled ghost layers
        dt: Step size; a warning is logged when it exceeds the acoustic CFL bound
        ctx: Solver context (converted to the unsplit parameters when needed)

    Returns:
        New state with filled ghost layers

    Raises:
        StepError: On positivity loss or an invalid interface state
    """
    ctx = reference_context(ctx)
    if dt == 0.0:
        return state.copy()
    limit = acoustic_dt(state, ctx)
    if dt > limit * (1.0 + CFL_SLACK):
        logger.warning(f"Explicit step dt={dt:.6g} exceeds the acoustic CFL limit {limit:.6g}")

    grid = ctx.grid
    base = grid.interior_view(state.data)
    try:
        stage1 = state_from_interior(state, base + dt * reference_rhs(state, ctx), ctx)
        inner1 = grid.interior_view(stage1.data)
        stage2 = state_from_interior(
            state, 0.75 * base + 0.25 * (inner1 + dt * reference_rhs(stage1, ctx)), ctx)
        inner2 = grid.interior_view(stage2.data)
        new = state_from_interior(
            state, base / 3.0 + 2.0 / 3.0 * (inner2 + dt * reference_rhs(stage2, ctx)), ctx)
        rho, q, E = new.interior_conserved()
        eos_pressure(rho, q, E, ctx.params)
    except STEP_FAILURES as e:
        raise StepError(f"Explicit reference step with dt={dt:.6g} failed: {e}") from e
    ctx.stats.steps += 1
    return new
