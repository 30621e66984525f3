import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import yaml

from src.cases.analysis import component_names
from src.cases.scenarios import Scenario
from src.core.errors import SolverError
from src.core.params import SimParams
from src.core.state import ConservedField

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SUFFIXES = {"csv": ".csv", "vtk": ".vtk"}


class SnapshotError(SolverError):
    """Custom exception for snapshot and report I/O failures."""

    def __init__(self, message: str, path: Optional[Path] = None):
        self.path = path
        super().__init__(f"{message} ({path})" if path is not None else message)


def snapshot_frame(state: ConservedField, params: SimParams, scenario: Optional[Scenario] = None) -> pd.DataFrame:
    """
    Interior fields as one row per node, x varying slowest.

    Columns: x[, y], rho, qx[, qy], E, theta2, p, dtheta. ``dtheta`` is
    eps^2 theta2, converted to Kelvin when the scenario carries reference scales.
    """
    grid = state.grid
    columns: Dict[str, np.ndarray] = {}
    coords = [grid.interior_view(c) for c in grid.coords]
    for label, c in zip(("x", "y"), coords):
        columns[label] = c.ravel()
    inner = grid.interior_view(state.data)
    for k, name in enumerate(component_names(grid.dim)):
        columns[name] = inner[k].ravel()
    columns["p"] = state.pressure(params, interior=True).ravel()
    dtheta = params.eps2 * inner[2 + grid.dim]
    if scenario is not None and scenario.scales is not None:
        dtheta = scenario.scales.to_dimensional_theta(dtheta)
    columns["dtheta"] = dtheta.ravel()
    return pd.DataFrame(columns)


def _write_vtk(frame: pd.DataFrame, state: ConservedField, path: Path) -> None:
    grid = state.grid
    nx = grid.nx
    ny = grid.ny if grid.dim == 2 else 1
    dy = grid.dy if grid.dim == 2 else 1.0
    origin_y = grid.axis_coordinates(1)[grid.ghost] if grid.dim == 2 else 0.0
    lines: List[str] = [
        "# vtk DataFile Version 3.0",
        "solver snapshot",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {grid.axis_coordinates(0)[grid.ghost]:.17g} {origin_y:.17g} 0",
        f"SPACING {grid.dx:.17g} {dy:.17g} 1",
        f"POINT_DATA {nx * ny}",
    ]
    for name in frame.columns:
        if name in ("x", "y"):
            continue
        # VTK orders points with x varying fastest
        values = frame[name].to_numpy().reshape(nx, ny).T.ravel()
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.17g}" for v in values)
    path.write_text("\n".join(lines) + "\n")


def write_snapshot(state: ConservedField, params: SimParams, path: Path, fmt: str = "csv",
                   scenario: Optional[Scenario] = None) -> Path:
    """
    Write the interior fields of ``state`` with 17 significant digits.

    Args:
        state: State to write
        params: Parameters used for the pressure
        path: Target file; the format's suffix is appended unless a snapshot suffix is present
        fmt: "csv" or "vtk" (legacy structured points)
        scenario: Supplies reference scales for the dtheta column

    Returns:
        Path of the written file

    Raises:
        SnapshotError: On an unknown format or an I/O failure
    """
    if fmt not in SUFFIXES:
        raise SnapshotError(f"Unknown snapshot format {fmt!r}", Path(path))
    path = Path(path)
    if path.suffix in SUFFIXES.values():
        path = path.with_suffix(SUFFIXES[fmt])
    else:
        path = path.with_name(path.name + SUFFIXES[fmt])
    frame = snapshot_frame(state, params, scenario)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        else:
            _write_vtk(frame, state, path)
    except OSError as e:
        raise SnapshotError(f"Cannot write snapshot: {e}", path) from e
    logger.debug(f"Snapshot written to {path}")
    return path


def read_snapshot(path: Path) -> pd.DataFrame:
    """Read a CSV snapshot back without loss of precision."""
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise SnapshotError(f"Cannot read snapshot: {e}", Path(path)) from e


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    """CSV report (diagnostics, convergence, efficiency) at full precision."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise SnapshotError(f"Cannot write table: {e}", path) from e
    return path


def write_manifest(data: Dict[str, Any], path: Path) -> Path:
    """Run metadata as YAML, enough to re-execute the run."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(data, sort_keys=False))
    except OSError as e:
        raise SnapshotError(f"Cannot write manifest: {e}", path) from e
    return path


def snapshot_name(time: float) -> str:
    return f"snapshot_{time:.8e}"
