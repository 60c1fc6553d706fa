"""Exception hierarchy shared by the engines, solvers and CLI."""


class RenewalError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RenewalError, ValueError):
    """Dimension mismatch or malformed configuration."""


class DomainError(RenewalError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class EmptyLedgerError(RenewalError):
    """Ratio estimates were requested before any frame was recorded."""


class SamplingError(RenewalError, ValueError):
    """A sample-average was requested over an empty sample set."""


class BracketError(RenewalError):
    """Bisection bracket could not be validated after the allowed expansions."""


class ConvergenceError(RenewalError):
    """Bisection exceeded its iteration cap."""


class CapabilityError(RenewalError):
    """The scenario lacks a capability the engine needs."""


class InfeasibleError(RenewalError):
    """No mixture of pure policies satisfies the constraints."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class InvariantViolation(RenewalError, AssertionError):
    """A checkpoint invariant failed during a run."""

    def __init__(self, name, detail=""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name
        self.detail = detail
