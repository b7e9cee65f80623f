"""Exception hierarchy shared by every module of the lab.

Each error carries the originating module and operation so that the CLI can
report where a failure came from.
"""

from __future__ import annotations


class BlaschkeLabError(Exception):
    """Base class for all lab errors."""

    #: exit status used by the command line runner
    exit_code = 3

    def __init__(self, message: str, *, module: str | None = None, operation: str | None = None):
        super().__init__(message)
        self.module = module
        self.operation = operation

    def where(self) -> str:
        parts = [p for p in (self.module, self.operation) if p]
        return ".".join(parts) if parts else "unknown"


class PoleHit(BlaschkeLabError):
    pass


class RootFindFailure(BlaschkeLabError):
    pass


class NotExpanding(BlaschkeLabError):
    pass


class NotAdmissible(BlaschkeLabError):
    pass


class NoConvergence(BlaschkeLabError):
    pass


class DomainError(BlaschkeLabError):
    pass


class DimensionMismatch(BlaschkeLabError):
    pass


class NumericalBreakdown(BlaschkeLabError):
    pass


class BoundaryBlowup(BlaschkeLabError):
    pass


class ClassMismatch(BlaschkeLabError):
    pass


class DegenerateFit(BlaschkeLabError):
    pass


class ConfigError(BlaschkeLabError):
    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, message: str, problems: list[str] | None = None, **kw):
        super().__init__(message, **kw)
        self.problems = list(problems or [message])
