"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`DrudeHeomError`, so callers can catch one base class.  The
subclasses map onto distinct failure kinds and, through the CLI, onto
distinct process exit codes.
"""


class DrudeHeomError(Exception):
    """Base class for all errors raised by drudeheom."""


class ArgumentError(DrudeHeomError, ValueError):
    """An argument is outside its documented domain."""


class CapabilityError(DrudeHeomError):
    """The request is valid but exceeds a supported limit."""


class DomainError(DrudeHeomError, ValueError):
    """Evaluation requested at or too close to a singular point."""


class DegeneracyError(DrudeHeomError):
    """Parameters collide with a pole/coefficient degeneracy."""


class StructuralError(DrudeHeomError):
    """Shapes or index layouts are inconsistent."""


class DivergenceError(DrudeHeomError):
    """A propagation lost trace conservation or produced non-finite values."""

    def __init__(self, message, step=None, active_count=None):
        super().__init__(message)
        self.step = step
        self.active_count = active_count


class ResourceError(DrudeHeomError):
    """An enumeration or propagation exceeded its configured budget."""


class InternalError(DrudeHeomError):
    """An internal consistency check failed (likely a bug, not bad input)."""
