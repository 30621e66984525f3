from typing import Sequence, Union

import numpy as np

from src.core.grid import Grid
from src.stencil.weno import (WenoConfig, interface_difference, interface_stencils,
                              interior_transverse, lf_split, weno5_reconstruct)


def _per_axis(V: Union[np.ndarray, Sequence[np.ndarray]], dim: int) -> Sequence[np.ndarray]:
    if isinstance(V, np.ndarray):
        return [V] * dim
    return V


def div_w(F: Sequence[np.ndarray], V: Union[np.ndarray, Sequence[np.ndarray]], lam: float,
          grid: Grid, config: WenoConfig) -> np.ndarray:
    """
    Component-wise WENO5 divergence with Lax-Friedrichs splitting.

    Args:
        F: Flux per axis, each of shape (ncomp, *grid.shape) with ghosts filled
        V: Viscosity field (ncomp, *grid.shape), or one per axis
        lam: Global viscosity coefficient
        grid: Grid the fields live on
        config: Reconstruction settings

    Returns:
        Sum over axes of the flux differences, shape (ncomp, *interior shape)
    """
    G = grid.ghost
    visc = _per_axis(V, grid.dim)
    out = None
    for axis, (flux, v) in enumerate(zip(F, visc)):
        split = lf_split(interior_transverse(flux, axis, G), interior_transverse(v, axis, G), lam)
        n = grid.counts[axis]
        fhat = (weno5_reconstruct(interface_stencils(split.plus, axis + 1, G, n, "left"), config)
                + weno5_reconstruct(interface_stencils(split.minus, axis + 1, G, n, "right"), config))
        term = interface_difference(fhat, axis + 1, grid.spacings[axis])
        out = term if out is None else out + term
    return out


def grad_uw(theta2: np.ndarray, u: np.ndarray, grid: Grid, config: WenoConfig) -> np.ndarray:
    """
    Upwind advection u . grad(theta2) from one-sided WENO5 derivatives.

    The side follows the sign of each velocity component; where it vanishes the two
    one-sided derivatives are averaged.

    Args:
        theta2: Scalar field on the extended grid, ghosts filled
        u: Velocity (dim, *grid.shape)
        grid: Grid the fields live on
        config: Reconstruction settings

    Returns:
        Advection term on interior nodes
    """
    G = grid.ghost
    out = np.zeros(grid.counts)
    for axis in range(grid.dim):
        n = grid.counts[axis]
        h = grid.spacings[axis]
        line = interior_transverse(theta2, axis, G, lead=0)
        from_left = interface_difference(
            weno5_reconstruct(interface_stencils(line, axis, G, n, "left"), config), axis, h)
        from_right = interface_difference(
            weno5_reconstruct(interface_stencils(line, axis, G, n, "right"), config), axis, h)
        vel = grid.interior_view(u[axis])
        deriv = np.where(vel > 0.0, from_left, np.where(vel < 0.0, from_right, 0.5 * (from_left + from_right)))
        out += vel * deriv
    return out
