from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.cases.scenarios import Scenario, build_case, list_cases
from src.core.params import WeightsMode


class Scheme(str, Enum):
    IMEX1 = "imex1"
    IMEX3 = "imex3"
    EXPLICIT_RK3 = "explicit_rk3"


class OutputFormat(str, Enum):
    CSV = "csv"
    VTK = "vtk"


class RunConfig(BaseModel):
    """Validated settings of one run; fields left at None keep the case defaults."""
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    case: str
    scheme: Scheme = Scheme.IMEX3
    nx: Optional[int] = Field(default=None, gt=0)
    ny: Optional[int] = Field(default=None, gt=0)
    eps: Optional[float] = Field(default=None, ge=0.0)
    cfl: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    t_end: Optional[float] = Field(default=None, ge=0.0)
    weights: Optional[WeightsMode] = None
    out: Path = Path("output")
    format: OutputFormat = OutputFormat.CSV
    # Snapshot every k steps; 0 writes only the initial and final states
    snapshot_every: int = Field(default=0, ge=0)
    max_steps: Optional[int] = Field(default=None, gt=0)
    solver_tol: float = Field(default=1e-12, gt=0.0)
    solver_max_iter: int = Field(default=500, gt=0)
    # Seed of the randomized self-checks run by `validate`
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    quiet: bool = False
    perturbed: Optional[bool] = None
    p2_variant: Optional[str] = None

    @field_validator("case")
    @classmethod
    def _known_case(cls, value: str) -> str:
        if value not in list_cases():
            raise ValueError(f"Unknown case {value!r}, available: {', '.join(list_cases())}")
        return value

    @model_validator(mode="after")
    def _case_consistent(self) -> "RunConfig":
        # Builds the scenario once so case-level rules reject the config early
        self.scenario()
        return self

    def case_overrides(self) -> Dict[str, Any]:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "eps": self.eps,
            "cfl": self.cfl,
            "t_end": self.t_end,
            "weights_mode": self.weights,
            "perturbed": self.perturbed,
            "p2_variant": self.p2_variant,
        }

    def scenario(self, **changes) -> Scenario:
        """A fresh scenario for this config; ``changes`` replace individual overrides."""
        overrides = self.case_overrides()
        overrides.update(changes)
        return build_case(self.case, **overrides)

    def manifest(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
