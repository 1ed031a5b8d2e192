"""Exception types shared across the package."""

from __future__ import annotations


class CativError(Exception):
    """Base class for all errors raised by this package."""


class DataError(CativError, ValueError):
    """Invalid input data or parameters (malformed files, bad ranges, missing
    variation)."""


class WeakInstrumentError(CativError, RuntimeError):
    """The instrument moves treatment take-up too little to identify anything.

    Carries both estimated propensities and the tolerance that was violated.
    """

    def __init__(self, p0: float, p1: float, tol: float, message: str | None = None):
        self.p0 = float(p0)
        self.p1 = float(p1)
        self.tol = float(tol)
        if message is None:
            message = (
                f"weak instrument: p0={self.p0:.6g}, p1={self.p1:.6g}, "
                f"|p1 - p0|={abs(self.p1 - self.p0):.6g} < tol={self.tol:g}"
            )
        super().__init__(message)
