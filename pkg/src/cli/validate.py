import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from src.cases.scenarios import build_case, list_cases
from src.core.grid import Grid
from src.core.hydrostatic import hydrostatic_residual
from src.core.params import WeightsMode
from src.core.errors import SolverError
from src.integrator.tableau import SCHEMES, load_tableau, validate_tableau
from src.stencil.operators import div_w
from src.stencil.weno import WenoConfig

logger = logging.getLogger(__name__)

WENO_TOLERANCE = 1e-12
HYDROSTATIC_TOLERANCE = 1e-12


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def check_tableaux() -> List[CheckResult]:
    results = []
    for scheme, (_, order) in SCHEMES.items():
        try:
            report = validate_tableau(load_tableau(scheme))
        except SolverError as e:
            results.append(CheckResult(f"tableau {scheme}", False, str(e)))
            continue
        blocking = report.violations_up_to(order)
        detail = f"order {report.order} (design {order})"
        if blocking:
            detail += "; " + "; ".join(str(v) for v in blocking)
        results.append(CheckResult(f"tableau {scheme}", not blocking, detail))
    return results


def check_weno_exactness(n: int = 32, seed: int = 0) -> CheckResult:
    """Linear-weight flux differences reproduce the derivative of a quartic drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=5)
    grid = Grid(0.0, 1.0, n)
    x = grid.coords[0]
    f = np.polynomial.polynomial.polyval(x, coeffs)
    exact = np.polynomial.polynomial.polyval(grid.interior_view(x), np.polynomial.polynomial.polyder(coeffs))
    config = WenoConfig(weights_mode=WeightsMode.LINEAR)
    approx = div_w([f[None]], np.zeros((1,) + grid.shape), 0.0, grid, config)[0]
    error = float(np.max(np.abs(approx - exact)) / max(1.0, float(np.max(np.abs(exact)))))
    return CheckResult("weno degree-4 exactness", error <= WENO_TOLERANCE,
                       f"relative error {error:.2e} (seed {seed})")


def check_hydrostatic_residuals(n: int = 32) -> List[CheckResult]:
    results = []
    for name in list_cases():
        scenario = build_case(name, nx=n)
        residual = hydrostatic_residual(scenario.hydro, scenario.grid)
        results.append(CheckResult(f"hydrostatic {name}", residual <= HYDROSTATIC_TOLERANCE,
                                   f"residual {residual:.2e}"))
    return results


def run_validation(seed: int = 0) -> List[CheckResult]:
    """Tableau order conditions, WENO exactness and hydrostatic residuals of every case."""
    logger.info(f"Running self-checks with seed {seed}")
    results = check_tableaux()
    results.append(check_weno_exactness(seed=seed))
    results.extend(check_hydrostatic_residuals())
    for r in results:
        log = logger.info if r.ok else logger.error
        log(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    return results
