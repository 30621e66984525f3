import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.eos import eos_pressure
from src.core.errors import SolverError
from src.core.grid import Grid
from src.core.hydrostatic import SampledBackground
from src.core.params import SimParams
from src.stencil.weno import (WenoConfig, take_along, interface_difference, interior_transverse,
                              lf_split, weno5_apply, weno5_weights)

logger = logging.getLogger(__name__)


class NumericalStateError(SolverError):
    """Custom exception for interface states without a valid eigen-decomposition."""

    def __init__(self, message: str, location: Optional[Tuple[int, ...]] = None):
        self.location = location
        if location is not None:
            message = f"{message} at interface index {location}"
        super().__init__(message)


def euler_flux(U: np.ndarray, axis: int, params: SimParams) -> np.ndarray:
    """
    Flux of (rho, q, E) along ``axis`` with the pressure scaled by alpha / eps^2.

    Args:
        U: Euler block (dim + 2, *shape)
        axis: Flux direction
        params: Simulation parameters

    Returns:
        Flux array with the shape of U
    """
    dim = U.shape[0] - 2
    rho, q, E = U[0], U[1:1 + dim], U[1 + dim]
    p = eos_pressure(rho, q, E, params)
    un = q[axis] / rho
    F = np.empty_like(U)
    F[0] = q[axis]
    for k in range(dim):
        F[1 + k] = q[k] * un
    F[1 + axis] += params.pressure_scale * p
    F[1 + dim] = (E + p) * un
    return F


def _normal_order(nc: int, axis: int) -> List[int]:
    """Component permutation putting the momentum normal to ``axis`` first."""
    if nc == 3 or axis == 0:
        return list(range(nc))
    return [0, 2, 1, 3]


def interface_eigenvectors(rho: np.ndarray, u: Sequence[np.ndarray], p: np.ndarray,
                           params: SimParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Right and left eigenvectors of the scaled Euler flux Jacobian.

    ``u`` lists the normal velocity first. Columns of R are ordered as the slow
    acoustic wave, the entropy wave, the shear wave (2D only) and the fast acoustic
    wave. Both matrices are returned with shape (*rho.shape, nc, nc).
    """
    gamma, eps2, s = params.gamma, params.eps2, params.pressure_scale
    un = u[0]
    ut = u[1] if len(u) > 1 else None
    speed2 = un * un if ut is None else un * un + ut * ut
    c2 = gamma * p / rho
    bcoef = (1.0 - gamma + (gamma - 1.0) * eps2 * s) * un
    disc = np.sqrt(bcoef * bcoef + 4.0 * s * c2)
    kin = 0.5 * eps2 * speed2

    def acoustic(mu: np.ndarray) -> List[np.ndarray]:
        col = [rho, rho * (un + mu)]
        if ut is not None:
            col.append(rho * ut)
        col.append(rho * kin + eps2 * rho * un * mu + rho * mu * mu / (s * (gamma - 1.0)))
        return col

    ones = np.ones_like(rho)
    zeros = np.zeros_like(rho)
    entropy = [ones, un] + ([ut] if ut is not None else []) + [kin]
    columns = [acoustic(0.5 * (-bcoef - disc)), entropy]
    if ut is not None:
        columns.append([zeros, zeros, rho, eps2 * rho * ut])
    columns.append(acoustic(0.5 * (-bcoef + disc)))

    R = np.stack([np.stack(col, axis=-1) for col in columns], axis=-1)
    try:
        L = np.linalg.inv(R)
    except np.linalg.LinAlgError as e:
        raise NumericalStateError("Singular eigenvector matrix") from e
    return R, L


def _project(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", M, v)


def _characteristic_pass(U: np.ndarray, F: np.ndarray, V: np.ndarray, P: Optional[np.ndarray],
                         axis: int, n: int, ghost: int, lam: float, params: SimParams,
                         config: WenoConfig, trace: Optional[Dict]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Characteristic-wise WENO5 interface fluxes along one axis.

    Inputs are (nc, *spatial) arrays already restricted to the interior in every
    other axis. Returns the n + 1 interface fluxes and, when ``P`` is given, the
    interface values of P reconstructed with the same eigenvectors and weights.
    """
    nc = U.shape[0]
    dim = nc - 2
    order = _normal_order(nc, axis)
    U, F, V = U[order], F[order], V[order]
    if P is not None:
        P = P[order]

    rho = U[0]
    q = U[1:1 + dim]
    p = eos_pressure(rho, q, U[1 + dim], params)
    m = n + 1
    base = ghost - 1

    def mean(a: np.ndarray) -> np.ndarray:
        return 0.5 * (take_along(a, axis, base, m) + take_along(a, axis, base + 1, m))

    rho_m, p_m = mean(rho), mean(p)
    u_m = [mean(q[k] / rho) for k in range(dim)]
    bad = ~((rho_m > 0.0) & (p_m > 0.0))
    if np.any(bad):
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericalStateError("Nonpositive sound speed in interface state", loc)
    R, L = interface_eigenvectors(rho_m, u_m, p_m, params)

    split = lf_split(F, V, lam)
    plus = np.moveaxis(split.plus, 0, -1)
    minus = np.moveaxis(split.minus, 0, -1)

    def stencil(arr: np.ndarray, offsets: Sequence[int]) -> List[np.ndarray]:
        return [_project(L, take_along(arr, axis, base + o, m)) for o in offsets]

    left, right = (-2, -1, 0, 1, 2), (3, 2, 1, 0, -1)
    s_plus, s_minus = stencil(plus, left), stencil(minus, right)
    w_plus, w_minus = weno5_weights(s_plus, config), weno5_weights(s_minus, config)
    fhat = _project(R, weno5_apply(s_plus, w_plus) + weno5_apply(s_minus, w_minus))
    fhat = np.moveaxis(fhat, -1, 0)[order]

    phat = None
    if P is not None:
        half = np.moveaxis(0.5 * P, 0, -1)
        phat = _project(R, weno5_apply(stencil(half, left), w_plus) + weno5_apply(stencil(half, right), w_minus))
        if trace is not None:
            # source interfaces stay in the axis-normal component order
            trace.setdefault(axis, []).append({"flux": (w_plus, w_minus), "eigenvectors": (R, L),
                                                "source": phat})
        phat = np.moveaxis(phat, -1, 0)[order]
    return fhat, phat


def _sweep(U: np.ndarray, F: np.ndarray, V: np.ndarray, P: Optional[np.ndarray], axis: int,
           grid: Grid, lam: float, params: SimParams, config: WenoConfig,
           trace: Optional[Dict]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Run one axis, splitting the transverse direction into row blocks across workers."""
    G = grid.ghost
    n = grid.counts[axis]
    h = grid.spacings[axis]
    arrays = [interior_transverse(a, axis, G) for a in (U, F, V)]
    P_t = interior_transverse(P, axis, G) if P is not None else None

    def finish(fhat: np.ndarray, phat: Optional[np.ndarray]):
        div = interface_difference(fhat, axis + 1, h)
        src = interface_difference(phat, axis + 1, h) if phat is not None else None
        return div, src

    if grid.dim == 1 or config.workers == 1:
        return finish(*_characteristic_pass(*arrays, P_t, axis, n, G, lam, params, config, trace))

    transverse = 2 - axis
    blocks = np.array_split(np.arange(arrays[0].shape[transverse]), config.workers)
    blocks = [b for b in blocks if b.size]

    def run(idx: np.ndarray):
        cut = [np.take(a, idx, axis=transverse) for a in arrays]
        p_cut = np.take(P_t, idx, axis=transverse) if P_t is not None else None
        return _characteristic_pass(*cut, p_cut, axis, n, G, lam, params, config, None)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        parts = list(pool.map(run, blocks))
    fhat = np.concatenate([f for f, _ in parts], axis=transverse)
    phat = np.concatenate([p for _, p in parts], axis=transverse) if P_t is not None else None
    return finish(fhat, phat)


def div_cw(U: np.ndarray, lam: float, grid: Grid, params: SimParams,
           config: WenoConfig) -> np.ndarray:
    """
    Characteristic-wise WENO5 divergence of the Euler flux with viscosity field U.

    Args:
        U: Euler block (rho, q, E) on the extended grid, ghosts filled
        lam: Global viscosity coefficient
        grid: Grid the state lives on
        params: Simulation parameters
        config: Reconstruction settings

    Returns:
        Flux divergence on interior nodes, shape (dim + 2, *interior)

    Raises:
        NumericalStateError: If an interface state has no valid eigen-decomposition
    """
    out = None
    for axis in range(grid.dim):
        div, _ = _sweep(U, euler_flux(U, axis, params), U, None, axis, grid, lam, params, config, None)
        out = div if out is None else out + div
    return out


def prebalanced_state(U: np.ndarray, bg: SampledBackground) -> np.ndarray:
    """Equilibrium-subtracted viscosity field (rho - rho0, q, E - p0 / (gamma - 1))."""
    dim = U.shape[0] - 2
    V = U.copy()
    V[0] -= bg.rho0
    V[1 + dim] -= bg.E0
    return V


def div_cw_wb(U: np.ndarray, bg: SampledBackground, lam: float, grid: Grid, params: SimParams,
              config: WenoConfig, trace: Optional[Dict] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Well-balanced characteristic-wise divergence and its matching gravity source.

    The split fluxes use the prebalanced viscosity, so at a discrete equilibrium they
    reduce to the background pressure flux. The source reconstructs p0 / 2 with the
    same eigenvectors and weights, so flux divergence minus source vanishes at
    equilibrium. Only the momentum components are scaled by rho / rho0; the mass and
    energy components stay interface differences and sum to zero on periodic grids.

    Args:
        U: Euler block on the extended grid, ghosts filled
        bg: Sampled hydrostatic background of the same grid
        lam: Global viscosity coefficient
        grid: Grid the state lives on
        params: Simulation parameters
        config: Reconstruction settings
        trace: Optional dict collecting, per axis, the flux weights, the interface
            eigenvector pair (R, L) and the reconstructed source interface values

    Returns:
        (flux divergence, balanced source), both of shape (dim + 2, *interior)
    """
    dim = grid.dim
    V = prebalanced_state(U, bg)
    ratio = grid.interior_view(U[0] / bg.rho0)
    momentum = slice(1, 1 + dim)
    div_total, src_total = None, None
    for axis in range(dim):
        P = np.zeros_like(U)
        P[1 + axis] = params.pressure_scale * bg.p0
        div, src = _sweep(U, euler_flux(U, axis, params), V, P, axis, grid, lam, params, config, trace)
        div_total = div if div_total is None else div_total + div
        src_total = src if src_total is None else src_total + src
    src_total[momentum] *= ratio
    return div_total, src_total
