import logging
import platform
import time as clock
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy
from tqdm import tqdm

from src.cases.analysis import component_names, convergence_table, diagnostics, exact_solution, l1_error
from src.cases.scenarios import Scenario, initial_state
from src.cli.config import OutputFormat, RunConfig, Scheme
from src.cli.output import snapshot_name, write_manifest, write_snapshot, write_table
from src.cli.reference import acoustic_dt, reference_context, reference_explicit_step
from src.core.errors import ConfigurationError, SolverError
from src.core.state import ConservedField
from src.integrator.context import SolverContext
from src.integrator.imex import StepError, advance_step, first_order_step
from src.integrator.spatial import compute_dt
from src.integrator.tableau import SCHEMES, load_tableau, require_valid
from src.stencil.weno import WenoConfig

logger = logging.getLogger(__name__)

# Remaining time below this fraction of t_end counts as arrival
TIME_TOLERANCE = 1e-12

StepCallback = Callable[[int, float, ConservedField], None]


@dataclass
class IntegrationResult:
    """Outcome of a time loop."""
    state: ConservedField
    time: float
    steps: int
    wall_time: float
    dts: List[float] = field(default_factory=list)
    ctx: Optional[SolverContext] = None

    @property
    def mean_dt(self) -> float:
        return float(np.mean(self.dts)) if self.dts else 0.0


def make_context(scenario: Scenario, config: RunConfig) -> SolverContext:
    params = scenario.params.with_overrides(solver_tol=config.solver_tol, solver_max_iter=config.solver_max_iter)
    weno = WenoConfig(weights_mode=params.weights_mode, workers=config.workers)
    ctx = SolverContext(scenario.grid, scenario.hydro, params, scenario.boundary, weno)
    if config.scheme is Scheme.EXPLICIT_RK3:
        ctx = reference_context(ctx)
    return ctx


def _stepper(scheme: Scheme) -> Callable[[ConservedField, float, SolverContext], ConservedField]:
    if scheme is Scheme.EXPLICIT_RK3:
        return reference_explicit_step
    pair = load_tableau(scheme.value)
    require_valid(pair, SCHEMES[scheme.value][1])
    if scheme is Scheme.IMEX1:
        return first_order_step
    return lambda state, dt, ctx: advance_step(state, dt, pair, ctx)


def _step_size(state: ConservedField, ctx: SolverContext, scheme: Scheme) -> float:
    if scheme is Scheme.EXPLICIT_RK3:
        return acoustic_dt(state, ctx)
    return compute_dt(state, ctx.grid, ctx.params)


def integrate(scenario: Scenario, config: RunConfig, on_step: Optional[StepCallback] = None,
              state: Optional[ConservedField] = None) -> IntegrationResult:
    """
    Advance a scenario from its initial state to ``scenario.t_end``.

    The last step is shortened to land on t_end. ``on_step`` sees the step index,
    time and state after the initial state and after every step.

    Raises:
        StepError: Carrying the failing step index and time
    """
    ctx = make_context(scenario, config)
    step = _stepper(config.scheme)
    if state is None:
        state = initial_state(scenario)
    t_end = scenario.t_end
    t, n = 0.0, 0
    dts: List[float] = []
    if on_step is not None:
        on_step(0, t, state)

    started = clock.perf_counter()
    with tqdm(total=t_end, disable=config.quiet, unit="t", desc=scenario.name, leave=False) as bar:
        while t_end - t > TIME_TOLERANCE * max(t_end, 1.0):
            if config.max_steps is not None and n >= config.max_steps:
                logger.info(f"Stopping after the step limit of {config.max_steps}")
                break
            dt = min(_step_size(state, ctx, config.scheme), t_end - t)
            try:
                state = step(state, dt, ctx)
            except StepError as e:
                e.step, e.time = n + 1, t
                logger.error(f"Step {n + 1} at t={t:.6g} failed: {e}")
                raise
            t += dt
            n += 1
            dts.append(dt)
            bar.update(dt)
            logger.debug(f"step {n}: t={t:.6g} dt={dt:.3e}")
            if on_step is not None:
                on_step(n, t, state)
    wall = clock.perf_counter() - started
    return IntegrationResult(state, t, n, wall, dts, ctx)


def _manifest(config: RunConfig, scenario: Scenario, status: str, result: Optional[IntegrationResult],
              ctx_stats: Dict[str, int], outputs: List[str], time_reached: float, steps: int) -> Dict:
    params = scenario.params
    return {
        "status": status,
        "config": config.manifest(),
        "case": {
            "name": scenario.name,
            "grid": list(scenario.grid.counts),
            "eps": params.eps,
            "gamma": params.gamma,
            "cfl": params.cfl,
            "alpha": params.alpha,
            "t_end": scenario.t_end,
        },
        "steps": steps,
        "time": time_reached,
        "wall_time": result.wall_time if result is not None else None,
        "solver": ctx_stats,
        "outputs": outputs,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }


def run_simulation(config: RunConfig) -> IntegrationResult:
    """
    Run one case and write its artifacts to ``config.out``.

    Writes the initial snapshot, snapshots every ``snapshot_every`` steps, the
    final state, ``diagnostics.csv`` and ``manifest.txt``. On any solver failure the
    last valid state and a failed manifest are written before the error propagates.

    Raises:
        StepError: If a step fails
        SolverError: On other failures during the run, such as an invalid operator setup
    """
    scenario = config.scenario()
    out = Path(config.out)
    fmt = config.format.value if isinstance(config.format, OutputFormat) else str(config.format)
    records: List[Dict[str, float]] = []
    outputs: List[str] = []
    last = {"state": None, "time": 0.0, "step": 0}
    params = scenario.params

    def on_step(n: int, t: float, state: ConservedField) -> None:
        record = {"step": n, "time": t}
        record.update(diagnostics(state, scenario, params=params))
        records.append(record)
        last.update(state=state, time=t, step=n)
        if n == 0 or (config.snapshot_every and n % config.snapshot_every == 0):
            outputs.append(str(write_snapshot(state, params, out / snapshot_name(t), fmt, scenario)))

    logger.info(f"Running {scenario.name} with {config.scheme.value} on {scenario.grid.counts} to T={scenario.t_end:g}")
    try:
        result = integrate(scenario, config, on_step)
    except SolverError:
        if last["state"] is not None:
            outputs.append(str(write_snapshot(last["state"], params, out / "last_valid", fmt, scenario)))
        write_table(pd.DataFrame(records), out / "diagnostics.csv")
        write_manifest(_manifest(config, scenario, "failed", None, {}, outputs, last["time"], last["step"]),
                       out / "manifest.txt")
        raise

    if result.steps > 0 and not (config.snapshot_every and result.steps % config.snapshot_every == 0):
        outputs.append(str(write_snapshot(result.state, params, out / snapshot_name(result.time), fmt, scenario)))
    outputs.append(str(write_snapshot(result.state, params, out / "final", fmt, scenario)))
    write_table(pd.DataFrame(records), out / "diagnostics.csv")
    stats = result.ctx.stats
    write_manifest(_manifest(config, scenario, "completed", result,
                             {"elliptic_solves": stats.elliptic_solves,
                              "elliptic_iterations": stats.elliptic_iterations},
                             outputs, result.time, result.steps),
                   out / "manifest.txt")
    logger.info(f"Finished {scenario.name}: {result.steps} steps in {result.wall_time:.2f}s")
    return result


def run_convergence(config: RunConfig, ns: Sequence[int], eps_values: Optional[Sequence[float]] = None,
                    write: bool = True) -> pd.DataFrame:
    """
    L1 errors against the exact solution on a doubling mesh sequence, one block per eps.

    Returns:
        DataFrame with columns eps, N and per variable the error and its observed order

    Raises:
        ConfigurationError: If the case has no exact solution or N does not double
    """
    base = config.scenario()
    if not base.has_exact_solution:
        raise ConfigurationError(f"Case {config.case!r} has no exact solution to converge against")
    eps_values = list(eps_values) if eps_values else [base.params.eps]
    two_d = base.grid.dim == 2
    names = component_names(base.grid.dim)
    blocks = []
    for eps in eps_values:
        errors: Dict[str, Dict[int, float]] = {name: {} for name in names}
        for n in ns:
            scenario = config.scenario(nx=n, ny=n if two_d else None, eps=eps)
            result = integrate(scenario, config)
            exact = exact_solution(scenario, result.time)
            for name, value in l1_error(result.state, exact).items():
                errors[name][n] = value
            logger.info(f"eps={eps:g} N={n}: L1(rho)={errors['rho'][n]:.3e} in {result.steps} steps")
        block = pd.DataFrame({"eps": eps, "N": sorted(ns)})
        for name in names:
            table = convergence_table(errors[name])
            block[name] = table["error"].to_numpy()
            block[f"order_{name}"] = table["order"].to_numpy()
        blocks.append(block)
    frame = pd.concat(blocks, ignore_index=True)
    if write:
        write_table(frame, Path(config.out) / "convergence.csv")
    return frame


def run_comparison(config: RunConfig, write: bool = True) -> pd.DataFrame:
    """
    Run the semi-implicit scheme and the explicit reference on the same case.

    Returns:
        DataFrame with steps, mean dt and wall time per scheme, the ratios relative
        to the explicit run and the L1 density difference of the final states
    """
    imex_scheme = config.scheme if config.scheme is not Scheme.EXPLICIT_RK3 else Scheme.IMEX3
    runs = {}
    for scheme in (imex_scheme, Scheme.EXPLICIT_RK3):
        cfg = config.model_copy(update={"scheme": scheme})
        runs[scheme] = integrate(cfg.scenario(), cfg)
    explicit = runs[Scheme.EXPLICIT_RK3]
    difference = l1_error(runs[imex_scheme].state, explicit.state)["rho"]
    rows = []
    for scheme, result in runs.items():
        rows.append({
            "scheme": scheme.value,
            "steps": result.steps,
            "time": result.time,
            "mean_dt": result.mean_dt,
            "wall_time": result.wall_time,
            "dt_ratio": result.mean_dt / explicit.mean_dt if explicit.mean_dt > 0.0 else np.nan,
            "wall_ratio": explicit.wall_time / result.wall_time if result.wall_time > 0.0 else np.nan,
            "l1_rho_difference": difference,
        })
    frame = pd.DataFrame(rows)
    if write:
        write_table(frame, Path(config.out) / "efficiency.csv")
    return frame
