import numpy as np
from typing import Optional, Tuple


class SolverError(Exception):
    """Base exception for all solver-related errors."""
    pass


class ConfigurationError(SolverError, ValueError):
    """Custom exception for invalid parameters, cases and boundary setups."""
    pass


class DomainError(SolverError, ValueError):
    """Custom exception for inputs outside an operation's domain (e.g. nonpositive density)."""
    pass


class PositivityError(SolverError):
    """Custom exception for a derived density or pressure that is not positive."""

    def __init__(self, message: str, location: Optional[Tuple[int, ...]] = None):
        self.location = location
        if location is not None:
            message = f"{message} at index {location}"
        super().__init__(message)


class StateError(SolverError):
    """Custom exception for state that cannot be derived from what is available."""
    pass


def first_bad_index(mask) -> Optional[Tuple[int, ...]]:
    """Return the first index where ``mask`` is True, or None."""
    hits = np.argwhere(mask)
    if hits.size == 0:
        return None
    return tuple(int(i) for i in hits[0])
