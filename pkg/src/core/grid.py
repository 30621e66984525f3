from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from src.core.errors import ConfigurationError

MIN_GHOST = 3


@dataclass(frozen=True)
class Grid:
    """
    Uniform cell-centered Cartesian mesh with ghost layers.

    Nodes sit at x_i = xmin + (i - 1/2)dx for interior indices 1..nx. Arrays on the
    grid carry the ghost layers: spatial axis k of a field has n_k + 2*ghost entries
    and the interior is ``[ghost:-ghost]``. A grid with ``ny=None`` is one-dimensional.
    """
    xmin: float
    xmax: float
    nx: int
    ymin: float = 0.0
    ymax: float = 1.0
    ny: Optional[int] = None
    ghost: int = MIN_GHOST

    def __post_init__(self):
        if self.nx <= 0 or (self.ny is not None and self.ny <= 0):
            raise ConfigurationError(f"Cell counts must be positive, got nx={self.nx}, ny={self.ny}")
        if self.xmax <= self.xmin or (self.ny is not None and self.ymax <= self.ymin):
            raise ConfigurationError("Domain extents must satisfy max > min")
        if self.ghost < MIN_GHOST:
            raise ConfigurationError(f"Ghost width must be at least {MIN_GHOST}, got {self.ghost}")

    @property
    def dim(self) -> int:
        return 1 if self.ny is None else 2

    @property
    def dx(self) -> float:
        return (self.xmax - self.xmin) / self.nx

    @property
    def dy(self) -> float:
        if self.ny is None:
            raise ConfigurationError("A 1D grid has no y spacing")
        return (self.ymax - self.ymin) / self.ny

    @property
    def spacings(self) -> Tuple[float, ...]:
        return (self.dx,) if self.dim == 1 else (self.dx, self.dy)

    @property
    def counts(self) -> Tuple[int, ...]:
        return (self.nx,) if self.dim == 1 else (self.nx, self.ny)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Extended (ghost-inclusive) spatial shape."""
        return tuple(n + 2 * self.ghost for n in self.counts)

    @property
    def interior(self) -> Tuple[slice, ...]:
        g = self.ghost
        return tuple(slice(g, -g) for _ in range(self.dim))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Ghost-inclusive node coordinates along one axis."""
        lo = self.xmin if axis == 0 else self.ymin
        h = self.spacings[axis]
        i = np.arange(self.shape[axis])
        return lo + (i - self.ghost + 0.5) * h

    @cached_property
    def coords(self) -> Tuple[np.ndarray, ...]:
        """Ghost-inclusive coordinate arrays broadcast to the extended shape."""
        if self.dim == 1:
            return (self.axis_coordinates(0),)
        return tuple(np.meshgrid(self.axis_coordinates(0), self.axis_coordinates(1), indexing="ij"))

    def interior_view(self, arr: np.ndarray) -> np.ndarray:
        """Interior part of a field, keeping any leading component axes."""
        return arr[(Ellipsis,) + self.interior]

