"""Exception taxonomy.

Every error names the module and operation that raised it plus, when it
makes sense, the offending simplex / node / edge, so CLI diagnostics can
point at the worst offender directly.
"""

from __future__ import annotations


class GerbeIndexError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str, *, module: str = "", operation: str = "",
                 location=None):
        self.module = module
        self.operation = operation
        self.location = location
        prefix = ""
        if module or operation:
            prefix = "[%s.%s] " % (module or "?", operation or "?")
        suffix = ""
        if location is not None:
            suffix = " (at %r)" % (location,)
        super().__init__(prefix + message + suffix)


class NotACocycle(GerbeIndexError):
    pass


class NotScalar(GerbeIndexError):
    pass


class WeakCocycleViolation(GerbeIndexError):
    def __init__(self, message, *, residual=None, **kw):
        self.residual = residual
        super().__init__(message, **kw)


class TwistMismatch(GerbeIndexError):
    pass


class CoverMismatch(GerbeIndexError):
    pass


class ShapeMismatch(GerbeIndexError):
    pass


class IncompatibleAtlas(GerbeIndexError):
    pass


class GridTooCoarse(GerbeIndexError):
    pass


class DegreeMismatch(GerbeIndexError):
    pass


class SupportLeak(GerbeIndexError):
    def __init__(self, message, *, leak=None, **kw):
        self.leak = leak
        super().__init__(message, **kw)


class NotElliptic(GerbeIndexError):
    pass


class NotCertified(GerbeIndexError):
    pass


class StabilizationFailed(GerbeIndexError):
    pass


class NonConstantKernel(GerbeIndexError):
    pass


class FrameDegeneracy(GerbeIndexError):
    pass


class NotDiracPreset(GerbeIndexError):
    pass


class UnsupportedVersion(GerbeIndexError):
    pass


class ScenarioError(GerbeIndexError):
    """Scenario file parse / cross-reference failure."""

    def __init__(self, message, *, line=None, **kw):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message, **kw)
