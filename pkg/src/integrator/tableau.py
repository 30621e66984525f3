import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from src.core.errors import SolverError

logger = logging.getLogger(__name__)

TABLEAU_DIR = Path(__file__).resolve().parent / "tableaux"
TOLERANCE = 1e-14

# Scheme name -> (data file, design order)
SCHEMES: Dict[str, Tuple[str, int]] = {
    "imex1": ("imex1.txt", 1),
    "imex3": ("ars443.txt", 3),
}


class TableauError(SolverError):
    """Custom exception for malformed or rejected Butcher tableaux."""
    pass


@dataclass(frozen=True)
class ButcherPair:
    """Explicit tableau (A_ex, b_ex, c_ex) paired with a diagonally implicit tableau (A, b, c)."""
    name: str
    A_ex: np.ndarray
    b_ex: np.ndarray
    c_ex: np.ndarray
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.all(np.abs(self.b - self.A[-1]) <= TOLERANCE))


@dataclass
class Violation:
    condition: str
    order: int
    value: float
    expected: float

    def __str__(self) -> str:
        return f"[order {self.order}] {self.condition}: got {self.value:.17g}, expected {self.expected:.17g}"


@dataclass
class TableauReport:
    name: str
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def violations_up_to(self, order: int) -> List[Violation]:
        return [v for v in self.violations if v.order <= order]

    @property
    def order(self) -> int:
        """Highest order (up to 3) whose conditions all hold, structural checks included."""
        achieved = 0
        for k in (1, 2, 3):
            if any(v.order <= k for v in self.violations):
                break
            achieved = k
        return achieved


def parse_tableau(text: str, name: str) -> ButcherPair:
    """
    Parse ``stage_count`` followed by row-major A_ex, b_ex, c_ex, A, b, c.

    Lines starting with '#' are comments.
    """
    tokens: List[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens:
        raise TableauError(f"Tableau {name!r} is empty")
    try:
        s = int(tokens[0])
        values = np.array([float(t) for t in tokens[1:]])
    except ValueError as e:
        raise TableauError(f"Tableau {name!r} contains a non-numeric entry") from e
    expected = 2 * (s * s + 2 * s)
    if s < 1 or values.size != expected:
        raise TableauError(f"Tableau {name!r}: expected {expected} coefficients for {s} stages, got {values.size}")

    def take(offset: int, count: int) -> np.ndarray:
        return values[offset:offset + count]

    half = s * s + 2 * s
    parts = []
    for base in (0, half):
        parts.extend([take(base, s * s).reshape(s, s), take(base + s * s, s), take(base + s * s + s, s)])
    return ButcherPair(name, *parts)


def load_tableau(source: Union[str, Path]) -> ButcherPair:
    """
    Load a pair by scheme name (``imex1``, ``imex3``) or from a file path.

    Raises:
        TableauError: If the file is missing or malformed
    """
    if isinstance(source, str) and source in SCHEMES:
        path = TABLEAU_DIR / SCHEMES[source][0]
        name = source
    else:
        path = Path(source)
        name = path.stem
    try:
        text = path.read_text()
    except OSError as e:
        raise TableauError(f"Cannot read tableau file {path}: {e}") from e
    return parse_tableau(text, name)


def validate_tableau(pair: ButcherPair) -> TableauReport:
    """
    Check structure, row sums, stiff accuracy and the IMEX order conditions up to order 3.

    Structural failures are reported as order-1 violations so no order is claimed
    for a malformed pair.
    """
    report = TableauReport(pair.name)
    At, bt, ct = pair.A_ex, pair.b_ex, pair.c_ex
    A, b, c = pair.A, pair.b, pair.c

    def check(condition: str, order: int, value: float, expected: float) -> None:
        if not abs(value - expected) <= TOLERANCE:
            report.violations.append(Violation(condition, order, float(value), float(expected)))

    check("explicit matrix strictly lower triangular", 1, float(np.max(np.abs(np.triu(At)))), 0.0)
    check("implicit matrix lower triangular", 1, float(np.max(np.abs(np.triu(A, 1)))), 0.0)
    for i in range(pair.stages):
        check(f"c_ex[{i}] = row sum of A_ex", 1, ct[i], At[i].sum())
        check(f"c[{i}] = row sum of A", 1, c[i], A[i].sum())
    check("stiff accuracy b = last row of A", 1, float(np.max(np.abs(b - A[-1]))), 0.0)

    check("sum b_ex = 1", 1, bt.sum(), 1.0)
    check("sum b = 1", 1, b.sum(), 1.0)

    for label, bb in (("b_ex", bt), ("b", b)):
        for cl, cc in (("c_ex", ct), ("c", c)):
            check(f"{label} . {cl} = 1/2", 2, bb @ cc, 0.5)

    for label, bb in (("b_ex", bt), ("b", b)):
        for c1l, c1 in (("c_ex", ct), ("c", c)):
            for c2l, c2 in (("c_ex", ct), ("c", c)):
                if c1l <= c2l:
                    check(f"{label} . ({c1l} {c2l}) = 1/3", 3, bb @ (c1 * c2), 1.0 / 3.0)
        for Ml, M in (("A_ex", At), ("A", A)):
            for cl, cc in (("c_ex", ct), ("c", c)):
                check(f"{label} . {Ml} {cl} = 1/6", 3, bb @ (M @ cc), 1.0 / 6.0)
    return report


def require_valid(pair: ButcherPair, order: int) -> TableauReport:
    """
    Refuse a pair that violates any condition up to ``order``; log higher-order gaps.

    Raises:
        TableauError: Listing every violation at or below ``order``
    """
    report = validate_tableau(pair)
    blocking = report.violations_up_to(order)
    if blocking:
        details = "; ".join(str(v) for v in blocking)
        raise TableauError(f"Tableau {pair.name!r} fails order-{order} checks: {details}")
    for v in report.violations:
        logger.warning(f"Tableau {pair.name!r} accepted at order {order} despite {v}")
    return report
