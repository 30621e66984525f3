import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError
from src.core.grid import Grid

logger = logging.getLogger(__name__)

ScalarFn = Callable[..., np.ndarray]
VectorFn = Callable[..., Tuple[np.ndarray, ...]]


@dataclass(frozen=True)
class SampledBackground:
    """Background fields evaluated on every node of a grid, ghosts included."""
    rho0: np.ndarray
    p0: np.ndarray
    theta0: np.ndarray
    phi: np.ndarray
    grad_phi: np.ndarray
    grad_theta0: np.ndarray
    theta0_constant: bool
    gamma: float

    @property
    def E0(self) -> np.ndarray:
        return self.p0 / (self.gamma - 1.0)


@dataclass
class HydrostaticState:
    """
    Zero-velocity hydrostatic background with its gravitational potential.

    All callables take node coordinates (x in 1D, x and y in 2D) and return arrays of
    the same shape; vector callables return one array per axis. ``theta0`` defaults to
    the potential temperature of (rho0, p0). Leaving ``grad_theta0`` unset declares
    theta0 constant.
    """
    rho0: ScalarFn
    p0: ScalarFn
    phi: ScalarFn
    grad_phi: VectorFn
    gamma: float
    theta0: Optional[ScalarFn] = None
    grad_theta0: Optional[VectorFn] = None
    grad_p0: Optional[VectorFn] = None
    _samples: Dict[Tuple[Grid, Tuple[int, ...]], SampledBackground] = field(
        default_factory=dict, repr=False, compare=False)

    @property
    def theta0_constant(self) -> bool:
        return self.grad_theta0 is None

    def _theta0(self, *coords: np.ndarray) -> np.ndarray:
        if self.theta0 is not None:
            return np.broadcast_to(np.asarray(self.theta0(*coords), dtype=float), coords[0].shape)
        return np.power(self.p0(*coords), 1.0 / self.gamma) / self.rho0(*coords)

    def sample(self, grid: Grid, periodic_axes: Sequence[int] = ()) -> SampledBackground:
        """
        Evaluate the background on ``grid``; results are cached per grid and axes.

        Along every axis in ``periodic_axes`` the ghost layers hold the periodic image
        of the interior instead of the analytic values at the ghost coordinates.
        """
        key = (grid, tuple(sorted(set(periodic_axes))))
        cached = self._samples.get(key)
        if cached is not None:
            return cached

        coords = grid.coords
        shape = grid.shape

        def scalar(fn: ScalarFn) -> np.ndarray:
            return np.array(np.broadcast_to(np.asarray(fn(*coords), dtype=float), shape))

        def vector(fn: Optional[VectorFn]) -> np.ndarray:
            out = np.zeros((grid.dim,) + shape)
            if fn is None:
                return out
            comps = fn(*coords)
            if len(comps) != grid.dim:
                raise ConfigurationError(f"Gradient callable returned {len(comps)} components for a {grid.dim}D grid")
            for k, comp in enumerate(comps):
                out[k] = np.broadcast_to(np.asarray(comp, dtype=float), shape)
            return out

        rho0 = scalar(self.rho0)
        p0 = scalar(self.p0)
        if np.any(rho0 <= 0.0) or np.any(p0 <= 0.0):
            raise ConfigurationError("Hydrostatic background must have positive rho0 and p0 on the whole grid")

        sampled = SampledBackground(
            rho0=rho0,
            p0=p0,
            theta0=np.array(self._theta0(*coords), dtype=float),
            phi=scalar(self.phi),
            grad_phi=vector(self.grad_phi),
            grad_theta0=vector(self.grad_theta0),
            theta0_constant=self.theta0_constant,
            gamma=self.gamma,
        )
        for axis in key[1]:
            sampled = wrap_periodic(sampled, grid, axis)
        self._samples[key] = sampled
        logger.debug(f"Sampled hydrostatic background on grid {grid.counts}, periodic axes {key[1]}")
        return sampled


def periodic_index(grid: Grid, axis: int) -> np.ndarray:
    """Extended index along ``axis`` mapped to the interior node it copies under a periodic fill."""
    G, n = grid.ghost, grid.counts[axis]
    return G + (np.arange(n + 2 * G) - G) % n


def wrap_periodic(bg: SampledBackground, grid: Grid, axis: int) -> SampledBackground:
    """Copy of ``bg`` whose ghost layers along ``axis`` repeat the interior periodically."""
    idx = periodic_index(grid, axis)
    return replace(
        bg,
        rho0=np.take(bg.rho0, idx, axis=axis),
        p0=np.take(bg.p0, idx, axis=axis),
        theta0=np.take(bg.theta0, idx, axis=axis),
        phi=np.take(bg.phi, idx, axis=axis),
        grad_phi=np.take(bg.grad_phi, idx, axis=axis + 1),
        grad_theta0=np.take(bg.grad_theta0, idx, axis=axis + 1),
    )


def central_derivative4(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order central first derivative, valid two nodes away from the array ends."""
    out = np.zeros_like(f)
    n = f.shape[axis]

    def sl(a: int, b: int):
        idx = [slice(None)] * f.ndim
        idx[axis] = slice(a, n + b)
        return tuple(idx)

    core = sl(2, -2)
    out[core] = (f[sl(0, -4)] - 8.0 * f[sl(1, -3)] + 8.0 * f[sl(3, -1)] - f[sl(4, 0)]) / (12.0 * h)
    return out


def hydrostatic_residual(hydro: HydrostaticState, grid: Grid) -> float:
    """
    Max-norm over interior nodes of grad p0 + rho0 grad Phi.

    Uses the analytic ``grad_p0`` when provided, otherwise fourth-order central
    differences of the sampled p0 (ghost nodes supply the stencil reach).
    """
    bg = hydro.sample(grid)
    if hydro.grad_p0 is not None:
        comps = hydro.grad_p0(*grid.coords)
        grad_p0 = np.stack([np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in comps])
    else:
        grad_p0 = np.stack([central_derivative4(bg.p0, h, axis) for axis, h in enumerate(grid.spacings)])
    residual = grid.interior_view(grad_p0 + bg.rho0 * bg.grad_phi)
    return float(np.max(np.abs(residual)))
