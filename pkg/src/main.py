import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from src.cases.scenarios import build_case, list_cases
from src.cli.config import RunConfig
from src.cli.simulation import run_comparison, run_convergence, run_simulation
from src.cli.validate import run_validation
from src.core.errors import SolverError
from src.utils.load_config import load_config

logger = logging.getLogger(__name__)

# CLI dest -> RunConfig field
RUN_OPTIONS = ("case", "scheme", "nx", "ny", "eps", "cfl", "t_end", "weights", "out", "format",
               "snapshot_every", "max_steps", "solver_tol", "solver_max_iter", "workers", "seed",
               "perturbed", "p2_variant")


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_run_options(parser: argparse.ArgumentParser, eps_list: bool = False) -> None:
    parser.add_argument("--config", help="YAML file with run/grid/numerics/output sections")
    parser.add_argument("--case", choices=list_cases())
    parser.add_argument("--scheme", choices=["imex1", "imex3", "explicit_rk3"])
    parser.add_argument("--nx", type=int)
    parser.add_argument("--ny", type=int)
    if eps_list:
        parser.add_argument("--eps", type=_float_list, help="Comma-separated Mach numbers")
    else:
        parser.add_argument("--eps", type=float)
    parser.add_argument("--cfl", type=float)
    parser.add_argument("--t-end", dest="t_end", type=float)
    parser.add_argument("--weights", choices=["linear", "nonlinear"])
    parser.add_argument("--out")
    parser.add_argument("--format", choices=["csv", "vtk"])
    parser.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    parser.add_argument("--max-steps", dest="max_steps", type=int)
    parser.add_argument("--solver-tol", dest="solver_tol", type=float)
    parser.add_argument("--solver-max-iter", dest="solver_max_iter", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--perturbed", action="store_true", default=None,
                        help="isothermal: add the Gaussian pressure hump")
    parser.add_argument("--p2-variant", dest="p2_variant", choices=["symmetric", "printed"])
    parser.add_argument("--quiet", action="store_true", default=None, help="Disable the progress bar")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solver", description="All-Mach Euler solver with gravity")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_options(sub.add_parser("run", help="Run one case"))
    convergence = sub.add_parser("convergence", help="L1 errors and orders on a mesh sequence")
    _add_run_options(convergence, eps_list=True)
    convergence.add_argument("--n", type=_int_list, default=[16, 32, 64, 128, 256],
                             help="Comma-separated cell counts")
    _add_run_options(sub.add_parser("compare", help="Semi-implicit scheme against the explicit reference"))
    sub.add_parser("list-cases", help="List the benchmark cases")
    validate = sub.add_parser("validate", help="Tableau, WENO and hydrostatic self-checks")
    validate.add_argument("--config", help="YAML file; only its run.seed is read")
    validate.add_argument("--seed", type=int, help="Seed of the randomized checks")
    return parser


def make_run_config(args: argparse.Namespace, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Merge environment, config file and command line (later sources win) into a RunConfig."""
    settings = load_config(getattr(args, "config", None))
    settings.pop("log_level", None)
    for key in RUN_OPTIONS + ("quiet",):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if overrides:
        settings.update(overrides)
    if "case" not in settings:
        raise ValueError("No case given; use --case or the run section of the config file")
    return RunConfig(**settings)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    env = load_config()
    logging.basicConfig(level=env["log_level"], format="%(asctime)s %(name)s %(levelname)s %(message)s")

    try:
        if args.command == "list-cases":
            for name in list_cases():
                print(f"{name:12s} {build_case(name).description}")
            return 0

        if args.command == "validate":
            seed = args.seed if args.seed is not None else int(load_config(args.config).get("seed", 0))
            results = run_validation(seed)
            for r in results:
                print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
            return 0 if all(r.ok for r in results) else 1

        if args.command == "convergence":
            eps_values = args.eps
            config = make_run_config(args, {"eps": None})
            frame = run_convergence(config, args.n, eps_values)
            print(frame.to_string(index=False))
            return 0

        config = make_run_config(args)
        if args.command == "compare":
            print(run_comparison(config).to_string(index=False))
            return 0

        result = run_simulation(config)
        print(f"{config.case}: {result.steps} steps to t={result.time:.6g} in {result.wall_time:.2f}s")
        return 0
    except (ValidationError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return 2
    except SolverError as e:
        logger.error(f"Run failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
