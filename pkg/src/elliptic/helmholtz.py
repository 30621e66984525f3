import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, spilu, spsolve

from src.boundary.ghosts import BoundarySpec, ghost_index_map
from src.core.errors import SolverError
from src.core.grid import Grid
from src.core.hydrostatic import SampledBackground
from src.core.params import SimParams

logger = logging.getLogger(__name__)

LAPLACE4 = {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0, 1: 16.0 / 12.0, 2: -1.0 / 12.0}
DERIV4 = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}


class EllipticSolveError(SolverError):
    """Custom exception for failures of the perturbation-density solve."""

    def __init__(self, message: str, iterations: Optional[int] = None, residual: Optional[float] = None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


@dataclass
class LinearSystem:
    """
    Discrete Helmholtz problem for rho2 on the interior nodes.

    ``extended_operator`` maps ghost-inclusive values to interior rows;
    ``ghost_map``/``ghost_offset`` express the ghost fill as ext = ghost_map @ x + ghost_offset.
    """
    grid: Grid
    matrix: sp.csr_matrix
    rhs: np.ndarray
    extended_operator: sp.csr_matrix
    ghost_map: sp.csr_matrix
    ghost_offset: np.ndarray
    screen: float
    coupling: float
    mean_constrained: bool = False
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)

    def extend(self, x: np.ndarray) -> np.ndarray:
        """Ghost-inclusive field from interior unknowns, consistent with the assembled closure."""
        return (self.ghost_map @ x.ravel() + self.ghost_offset).reshape(self.grid.shape)

    def apply(self, field_ext: np.ndarray) -> np.ndarray:
        """Operator applied to a ghost-inclusive field, on interior nodes."""
        return (self.extended_operator @ field_ext.ravel()).reshape(self.grid.counts)


def _interior_flat(grid: Grid) -> np.ndarray:
    ranges = [np.arange(grid.ghost, grid.ghost + n) for n in grid.counts]
    mesh = np.meshgrid(*ranges, indexing="ij")
    return np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.shape)


def _shifted(grid: Grid, axis: int, offset: int) -> np.ndarray:
    ranges = [np.arange(grid.ghost, grid.ghost + n) for n in grid.counts]
    ranges[axis] = ranges[axis] + offset
    mesh = np.meshgrid(*ranges, indexing="ij")
    return np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.shape)


def stencil_matrix(grid: Grid, weights_per_axis: List[Optional[np.ndarray]], second: bool) -> sp.csr_matrix:
    """
    Interior-row matrix of sum_k d_k(w_k f) over ghost-inclusive f.

    ``second`` selects the fourth-order second derivative, otherwise the fourth-order
    first derivative. ``weights_per_axis[k]`` multiplies f pointwise (None skips the axis).
    """
    n_int = int(np.prod(grid.counts))
    n_ext = int(np.prod(grid.shape))
    rows_base = np.arange(n_int)
    rows, cols, vals = [], [], []
    coeffs = LAPLACE4 if second else DERIV4
    for axis, weight in enumerate(weights_per_axis):
        if weight is None:
            continue
        h = grid.spacings[axis]
        scale = 1.0 / (h * h) if second else 1.0 / h
        flat_weight = weight.ravel()
        for offset, c in coeffs.items():
            col = _shifted(grid, axis, offset)
            rows.append(rows_base)
            cols.append(col)
            vals.append(c * scale * flat_weight[col])
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_int, n_ext)).tocsr()


def _ghost_closure(grid: Grid, spec: BoundarySpec):
    mapping = ghost_index_map(grid, spec).ravel()
    n_ext = mapping.size
    interior = _interior_flat(grid)
    position = np.full(n_ext, -1, dtype=np.int64)
    position[interior] = np.arange(interior.size)

    linked = mapping >= 0
    ext_rows = np.nonzero(linked)[0]
    ext_cols = position[mapping[linked]]
    if np.any(ext_cols < 0):
        raise SolverError("Ghost closure references a non-interior node")
    P = sp.csr_matrix((np.ones(ext_rows.size), (ext_rows, ext_cols)), shape=(n_ext, interior.size))

    offset = np.zeros(n_ext)
    pinned_nodes = np.nonzero(~linked)[0]
    if pinned_nodes.size:
        pinned = spec.pinned.get("rho2")
        if pinned is None:
            raise SolverError("Inflow boundary requires prescribed rho2 exterior data")
        offset[pinned_nodes] = pinned.ravel()[-(mapping[pinned_nodes] + 1)]
    return P, offset


def assemble_helmholtz(rho_sss: np.ndarray, theta2: np.ndarray, bg: SampledBackground, tau: float,
                       params: SimParams, spec: BoundarySpec, grid: Grid) -> LinearSystem:
    """
    Assemble eps^2 rho2 - k (Lap(a rho2) + div(rho2 grad Phi)) = rhs with k = tau^2 (1 - alpha)^2.

    Args:
        rho_sss: Known density part on interior nodes
        theta2: Explicitly updated theta2 on the extended grid, ghosts filled
        bg: Sampled background of ``grid``
        tau: dt times the diagonal coefficient of the implicit stage
        params: Simulation parameters
        spec: Boundary kinds; the rho2 ghost closure follows the scalar ghost fill
        grid: Grid of the problem

    Returns:
        The assembled system; rhs includes k Lap(gamma p0 theta2 / theta0)
    """
    gamma, eps2 = params.gamma, params.eps2
    coupling = tau * tau * params.implicit_weight ** 2
    theta = bg.theta0 + eps2 * theta2
    a = gamma * bg.p0 * theta / (bg.rho0 * bg.theta0)

    n_int = int(np.prod(grid.counts))
    n_ext = int(np.prod(grid.shape))
    select = sp.csr_matrix((np.ones(n_int), (np.arange(n_int), _interior_flat(grid))), shape=(n_int, n_ext))

    laplace = stencil_matrix(grid, [a] * grid.dim, second=True)
    gravity = stencil_matrix(grid, [bg.grad_phi[k] for k in range(grid.dim)], second=False)
    extended = (eps2 * select - coupling * (laplace + gravity)).tocsr()

    known = stencil_matrix(grid, [np.ones(grid.shape)] * grid.dim, second=True) @ (
        gamma * bg.p0 * theta2 / bg.theta0).ravel()
    rhs = rho_sss.ravel() + coupling * known

    P, g = _ghost_closure(grid, spec)
    matrix = (extended @ P).tocsr()
    rhs = rhs - extended @ g

    mean_constrained = False
    if eps2 == 0.0 and coupling > 0.0 and spec.all_periodic(grid.dim):
        row_sums = np.abs(matrix @ np.ones(n_int))
        mean_constrained = bool(np.max(row_sums) <= 1e-10 * abs(matrix).max())

    return LinearSystem(grid=grid, matrix=matrix, rhs=rhs, extended_operator=extended, ghost_map=P,
                        ghost_offset=g, screen=eps2, coupling=coupling, mean_constrained=mean_constrained)


def _solve_mean_constrained(system: LinearSystem) -> np.ndarray:
    n = system.rhs.size
    ones = np.ones((n, 1))
    bordered = sp.bmat([[system.matrix, sp.csr_matrix(ones)], [sp.csr_matrix(ones.T), None]]).tocsc()
    rhs = np.append(system.rhs - np.mean(system.rhs), 0.0)
    solution = spsolve(bordered, rhs)
    x = solution[:n]
    return x - np.mean(x)


def solve_rho2(system: LinearSystem, params: SimParams) -> np.ndarray:
    """
    Solve for rho2 on the interior nodes.

    Without implicit coupling the system is diagonal and the rhs is returned
    (divided by eps^2, which is exact at eps = 1). 1D systems and zero-mean bordered
    systems use a direct sparse solve; 2D systems use ILU-preconditioned BiCGStab.

    Raises:
        EllipticSolveError: On breakdown, non-convergence within solver_max_iter or a non-finite solution
    """
    shape = system.grid.counts
    if system.coupling == 0.0:
        if system.screen == 0.0:
            raise EllipticSolveError("Degenerate system: no screening and no coupling")
        system.iterations = 0
        return (system.rhs / system.screen).reshape(shape)

    if system.mean_constrained:
        logger.debug("Solving zero-mean bordered system for rho2")
        x = _solve_mean_constrained(system)
        system.iterations = 1
    elif system.grid.dim == 1:
        x = spsolve(system.matrix.tocsc(), system.rhs)
        system.iterations = 1
    else:
        x = _krylov(system, params)

    if not np.all(np.isfinite(x)):
        raise EllipticSolveError("Non-finite rho2 solution", system.iterations)
    return np.asarray(x).reshape(shape)


def _krylov(system: LinearSystem, params: SimParams) -> np.ndarray:
    A = system.matrix.tocsc()
    try:
        ilu = spilu(A, drop_tol=1e-10, fill_factor=20.0)
        M = LinearOperator(A.shape, matvec=ilu.solve)
    except RuntimeError as e:
        logger.warning(f"ILU factorization failed ({e}), falling back to Jacobi preconditioning")
        inv_diag = 1.0 / A.diagonal()
        M = LinearOperator(A.shape, matvec=lambda v: inv_diag * v)

    count = 0
    history: List[float] = []

    def callback(xk: np.ndarray) -> None:
        nonlocal count
        count += 1
        history.append(float(np.linalg.norm(system.rhs - A @ xk)))

    x, info = bicgstab(A, system.rhs, rtol=params.solver_tol, atol=0.0,
                       maxiter=params.solver_max_iter, M=M, callback=callback)
    system.iterations = count
    system.residual_history = history
    if info != 0:
        residual = float(np.linalg.norm(system.rhs - A @ x))
        reason = f"breakdown (info={info})" if info < 0 else f"no convergence after {count} iterations"
        raise EllipticSolveError(f"BiCGStab {reason}, final residual {residual:.3e}", count, residual)
    logger.debug(f"rho2 solve converged in {count} iterations")
    return x


def p2_from_rho2(rho2: np.ndarray, theta2: np.ndarray, bg: SampledBackground,
                 params: SimParams) -> np.ndarray:
    """Linearized pressure perturbation gamma p0 / (rho0 theta0) (rho0 theta2 + rho2 theta)."""
    theta = bg.theta0 + params.eps2 * theta2
    return params.gamma * bg.p0 / (bg.rho0 * bg.theta0) * (bg.rho0 * theta2 + rho2 * theta)
