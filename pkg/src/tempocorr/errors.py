"""Exception types shared across modules; the CLI maps them to exit codes."""

from __future__ import annotations


class SizeGuardError(ValueError):
    """A requested enumeration or program exceeds its configured size limit."""


class NumericalError(RuntimeError):
    """A solver failed or returned a result outside its convergence tolerances."""


class AotViolationError(ValueError):
    """A behavior signals backwards in time, so the macrorealism question is ill-posed."""
