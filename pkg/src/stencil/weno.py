from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError
from src.core.params import WeightsMode

IDEAL_WEIGHTS = (0.1, 0.6, 0.3)

Stencil = Sequence[np.ndarray]
Weights = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class WenoConfig:
    """Reconstruction settings shared by every WENO operator."""
    eps_weno: float = 1e-6
    weights_mode: WeightsMode = WeightsMode.NONLINEAR
    # Thread count for row-block sweeps of the characteristic operators
    workers: int = 1

    def __post_init__(self):
        if not self.eps_weno > 0.0:
            raise ConfigurationError(f"eps_weno must be positive, got {self.eps_weno}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "weights_mode", WeightsMode(self.weights_mode))


@dataclass
class SplitFluxPair:
    """Lax-Friedrichs split fluxes F+ (upwind from the left) and F- (from the right)."""
    plus: np.ndarray
    minus: np.ndarray


def lf_split(F: np.ndarray, V: np.ndarray, lam: float) -> SplitFluxPair:
    """
    Lax-Friedrichs splitting F+- = (F +- lam V) / 2.

    Args:
        F: Flux field
        V: Viscosity field with the shape of F (the state, or its equilibrium-subtracted form)
        lam: Global viscosity coefficient

    Returns:
        The split pair
    """
    visc = lam * V
    return SplitFluxPair(0.5 * (F + visc), 0.5 * (F - visc))


def weno5_candidates(stencil: Stencil) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Third-order substencil values at the right interface of the central node."""
    v0, v1, v2, v3, v4 = stencil
    q0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0
    q1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0
    q2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0
    return q0, q1, q2


def weno5_weights(stencil: Stencil, config: WenoConfig) -> Weights:
    """Normalized WENO5-JS weights, or the ideal weights in linear mode."""
    v0, v1, v2, v3, v4 = stencil
    d0, d1, d2 = IDEAL_WEIGHTS
    if config.weights_mode is WeightsMode.LINEAR:
        ones = np.ones_like(np.asarray(v2, dtype=float))
        return d0 * ones, d1 * ones, d2 * ones

    b0 = 13.0 / 12.0 * (v0 - 2.0 * v1 + v2) ** 2 + 0.25 * (v0 - 4.0 * v1 + 3.0 * v2) ** 2
    b1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - v3) ** 2
    b2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (3.0 * v2 - 4.0 * v3 + v4) ** 2

    a0 = d0 / (config.eps_weno + b0) ** 2
    a1 = d1 / (config.eps_weno + b1) ** 2
    a2 = d2 / (config.eps_weno + b2) ** 2
    total = a0 + a1 + a2
    return a0 / total, a1 / total, a2 / total


def weno5_apply(stencil: Stencil, weights: Weights) -> np.ndarray:
    """Combine the substencil values of ``stencil`` with precomputed weights."""
    q0, q1, q2 = weno5_candidates(stencil)
    w0, w1, w2 = weights
    return w0 * q0 + w1 * q1 + w2 * q2


def weno5_reconstruct(stencil: Stencil, config: WenoConfig,
                      weights: Optional[Weights] = None) -> np.ndarray:
    """
    Left-biased WENO5 value at the right interface of the central stencil node.

    Args:
        stencil: Five contiguous values (v_{i-2}, ..., v_{i+2}), scalars or arrays
        config: Reconstruction settings
        weights: Weights to reuse instead of computing them from ``stencil``

    Returns:
        The reconstructed interface value
    """
    stencil = [np.asarray(v, dtype=float) for v in stencil]
    if len(stencil) != 5:
        raise ValueError(f"WENO5 needs 5 stencil values, got {len(stencil)}")
    if weights is None:
        weights = weno5_weights(stencil, config)
    return weno5_apply(stencil, weights)


def take_along(arr: np.ndarray, axis: int, start: int, count: int) -> np.ndarray:
    idx = [slice(None)] * arr.ndim
    idx[axis] = slice(start, start + count)
    return arr[tuple(idx)]


def interface_stencils(arr: np.ndarray, axis: int, ghost: int, n: int, upwind: str) -> List[np.ndarray]:
    """
    Five-point stencils for the n + 1 interfaces bounding the interior along ``axis``.

    Interface k + 1/2 runs over k = ghost - 1, ..., ghost + n - 1. ``upwind="left"``
    returns (v_{k-2}, ..., v_{k+2}); ``upwind="right"`` returns the mirrored stencil
    (v_{k+3}, ..., v_{k-1}) so the same formula gives the right-biased value.
    """
    if ghost < 3:
        raise ValueError(f"WENO5 requires at least 3 ghost layers, got {ghost}")
    m = n + 1
    base = ghost - 1
    if upwind == "left":
        offsets = (-2, -1, 0, 1, 2)
    elif upwind == "right":
        offsets = (3, 2, 1, 0, -1)
    else:
        raise ValueError(f"upwind must be 'left' or 'right', got {upwind!r}")
    return [take_along(arr, axis, base + o, m) for o in offsets]


def interface_difference(fhat: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(f_{i+1/2} - f_{i-1/2}) / h from the n + 1 interface values."""
    n = fhat.shape[axis] - 1
    return (take_along(fhat, axis, 1, n) - take_along(fhat, axis, 0, n)) / h


def interior_transverse(arr: np.ndarray, axis: int, ghost: int, lead: int = 1) -> np.ndarray:
    """
    Restrict every spatial axis except ``axis`` to its interior.

    ``lead`` is the number of leading component axes in ``arr``.
    """
    idx = [slice(None)] * arr.ndim
    for ax in range(lead, arr.ndim):
        if ax - lead != axis:
            idx[ax] = slice(ghost, arr.shape[ax] - ghost)
    return arr[tuple(idx)]
