import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError
from src.core.grid import Grid
from src.core.hydrostatic import HydrostaticState, SampledBackground
from src.core.state import ConservedField

logger = logging.getLogger(__name__)

SIDES = ("x-", "x+", "y-", "y+")


class BoundaryKind(str, Enum):
    PERIODIC = "periodic"
    INFLOW = "inflow"
    OUTFLOW = "outflow"
    TRANSMISSIVE_SPLIT = "transmissive_split"
    INVISCID_WALL = "inviscid_wall"


MIRRORED = (BoundaryKind.TRANSMISSIVE_SPLIT, BoundaryKind.INVISCID_WALL)


def side_axis(side: str) -> Tuple[int, bool]:
    """Axis index and whether ``side`` is the upper end of it."""
    if side not in SIDES:
        raise ConfigurationError(f"Unknown boundary side {side!r}, expected one of {SIDES}")
    return (0 if side[0] == "x" else 1), side[1] == "+"


@dataclass
class BoundarySpec:
    """
    Boundary kind per side plus the prescribed exterior data of inflow sides.

    ``pinned`` maps a field name ("state", "rho2", "p2") to a ghost-inclusive array
    whose ghost layers are the prescribed inflow values.
    """
    sides: Dict[str, BoundaryKind]
    extrapolate_background: bool = False
    pinned: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.sides = {side: BoundaryKind(kind) for side, kind in self.sides.items()}
        for side in self.sides:
            side_axis(side)
        for lo, hi in (("x-", "x+"), ("y-", "y+")):
            periodic = [self.sides.get(s) is BoundaryKind.PERIODIC for s in (lo, hi)]
            if periodic[0] != periodic[1]:
                raise ConfigurationError(f"Periodic boundaries must be paired: {lo}={self.sides.get(lo)}, "
                                         f"{hi}={self.sides.get(hi)}")

    @classmethod
    def uniform(cls, kind: BoundaryKind, dim: int) -> "BoundarySpec":
        return cls({side: kind for side in SIDES[:2 * dim]})

    def check_grid(self, grid: Grid) -> None:
        missing = [s for s in SIDES[:2 * grid.dim] if s not in self.sides]
        if missing:
            raise ConfigurationError(f"No boundary kind given for sides {missing}")

    def kind(self, side: str) -> BoundaryKind:
        return self.sides[side]

    def has_inflow(self) -> bool:
        return any(k is BoundaryKind.INFLOW for k in self.sides.values())

    def all_periodic(self, dim: int) -> bool:
        return all(self.sides[s] is BoundaryKind.PERIODIC for s in SIDES[:2 * dim])

    def periodic_axes(self, dim: int) -> Tuple[int, ...]:
        return tuple(axis for axis, side in enumerate(("x-", "y-")[:dim])
                     if self.sides.get(side) is BoundaryKind.PERIODIC)

    def pin(self, name: str, values: np.ndarray) -> None:
        """Record the exterior data used by inflow sides for field ``name``."""
        self.pinned[name] = np.array(values, copy=True)


def _index(ndim: int, axis: int, idx) -> Tuple:
    sl = [slice(None)] * ndim
    sl[axis] = idx
    return tuple(sl)


def extrapolate_ghosts(arr: np.ndarray, grid: Grid, lead: int = 1,
                       axes: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Replace the ghost layers of ``arr`` by cubic extrapolation from the nearest
    four interior nodes of each side (fourth-order accurate), on ``axes`` or all axes.
    """
    out = np.array(arr, copy=True)
    G = grid.ghost
    for axis in (range(grid.dim) if axes is None else axes):
        n = grid.counts[axis]
        ax = lead + axis
        for upper in (False, True):
            first = G + n - 1 if upper else G
            step = -1 if upper else 1
            nodes = [out[_index(out.ndim, ax, first + step * j)] for j in range(4)]
            for k in range(G):
                t = -(k + 1.0)
                value = 0.0
                for j in range(4):
                    weight = 1.0
                    for m in range(4):
                        if m != j:
                            weight *= (t - m) / (j - m)
                    value = value + weight * nodes[j]
                ghost = G + n + k if upper else G - 1 - k
                out[_index(out.ndim, ax, ghost)] = value
    return out


def _fill_side(arr: np.ndarray, grid: Grid, side: str, kind: BoundaryKind, lead: int,
               background: Optional[np.ndarray], odd: Sequence[int], pinned: Optional[np.ndarray]) -> None:
    axis, upper = side_axis(side)
    ax = lead + axis
    G = grid.ghost
    n = grid.counts[axis]
    nd = arr.ndim

    for k in range(G):
        ghost = G + n + k if upper else G - 1 - k
        if kind is BoundaryKind.PERIODIC:
            src = G + k if upper else G + n - 1 - k
            arr[_index(nd, ax, ghost)] = arr[_index(nd, ax, src)]
        elif kind is BoundaryKind.OUTFLOW:
            arr[_index(nd, ax, ghost)] = arr[_index(nd, ax, G + n - 1 if upper else G)]
        elif kind is BoundaryKind.INFLOW:
            if pinned is None:
                raise ConfigurationError(f"Inflow side {side} has no prescribed exterior data")
            arr[_index(nd, ax, ghost)] = pinned[_index(nd, ax, ghost)]
        else:
            mirror = G + n - 1 - k if upper else G + k
            g_sl, m_sl = _index(nd, ax, ghost), _index(nd, ax, mirror)
            if background is None:
                perturbation = arr[m_sl].copy()
            else:
                perturbation = arr[m_sl] - background[m_sl]
            if kind is BoundaryKind.INVISCID_WALL:
                for comp in odd:
                    perturbation[comp] = -perturbation[comp]
            arr[g_sl] = perturbation if background is None else background[g_sl] + perturbation


def fill_array_ghosts(arr: np.ndarray, grid: Grid, spec: BoundarySpec, lead: int = 1,
                      background: Optional[np.ndarray] = None,
                      odd_per_axis: Optional[Sequence[Sequence[int]]] = None,
                      pinned: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Fill the ghost layers of ``arr`` in place, x sides before y sides.

    Args:
        arr: Ghost-inclusive array with ``lead`` leading component axes
        grid: Grid of the array
        spec: Boundary kinds
        lead: Number of leading component axes (0 for a scalar field)
        background: Equilibrium part for mirrored sides; None mirrors ``arr`` itself
        odd_per_axis: Components that flip sign at walls normal to each axis
        pinned: Array holding the inflow exterior values

    Returns:
        The same array, for chaining
    """
    spec.check_grid(grid)
    for side in SIDES[:2 * grid.dim]:
        axis, _ = side_axis(side)
        odd = odd_per_axis[axis] if (odd_per_axis is not None and lead > 0) else ()
        _fill_side(arr, grid, side, spec.kind(side), lead, background, odd, pinned)
    return arr


def equilibrium_state(bg: SampledBackground, grid: Grid, spec: BoundarySpec) -> np.ndarray:
    """U0 = (rho0, 0, p0 / (gamma - 1), 0) on the extended grid."""
    dim = grid.dim
    U0 = np.zeros((dim + 3,) + grid.shape)
    U0[0] = bg.rho0
    U0[1 + dim] = bg.E0
    if spec.extrapolate_background:
        periodic = spec.periodic_axes(dim)
        U0 = extrapolate_ghosts(U0, grid, axes=[a for a in range(dim) if a not in periodic])
    return U0


def fill_ghosts(state: ConservedField, spec: BoundarySpec, hydro: HydrostaticState) -> ConservedField:
    """
    Populate every ghost layer of ``state`` in place.

    Mirrored sides split the state into the hydrostatic part U0 and the
    perturbation U - U0, mirror the perturbation (normal momentum odd at walls)
    and add U0 back at the ghost nodes.
    """
    grid = state.grid
    needs_background = any(k in MIRRORED for k in spec.sides.values())
    if needs_background:
        background = equilibrium_state(hydro.sample(grid, spec.periodic_axes(grid.dim)), grid, spec)
    else:
        background = None
    odd = [[1 + axis] for axis in range(grid.dim)]
    fill_array_ghosts(state.data, grid, spec, lead=1, background=background,
                      odd_per_axis=odd, pinned=spec.pinned.get("state"))
    return state


def fill_momentum_ghosts(q: np.ndarray, grid: Grid, spec: BoundarySpec) -> np.ndarray:
    """Ghost fill for a momentum field alone (background momentum is zero)."""
    pinned = spec.pinned.get("state")
    if pinned is not None:
        pinned = pinned[1:1 + grid.dim]
    odd = [[axis] for axis in range(grid.dim)]
    return fill_array_ghosts(q, grid, spec, lead=1, odd_per_axis=odd, pinned=pinned)


def fill_scalar_ghosts(arr: np.ndarray, grid: Grid, spec: BoundarySpec, name: str) -> np.ndarray:
    """Ghost fill for a perturbation scalar (rho2, p2, theta2): even mirrors, pinned inflow."""
    return fill_array_ghosts(arr, grid, spec, lead=0, pinned=spec.pinned.get(name))


def ghost_index_map(grid: Grid, spec: BoundarySpec) -> np.ndarray:
    """
    Source of every node's value under a scalar ghost fill.

    Entry e >= 0 is the flat (extended) index of the interior node whose value the
    node takes; entry -(1 + e) marks a pinned inflow value stored at flat index e.
    """
    size = int(np.prod(grid.shape))
    idx = np.arange(size, dtype=np.int64).reshape(grid.shape)
    pinned = -(1 + np.arange(size, dtype=np.int64)).reshape(grid.shape) if spec.has_inflow() else None
    return fill_array_ghosts(idx, grid, spec, lead=0, pinned=pinned)
