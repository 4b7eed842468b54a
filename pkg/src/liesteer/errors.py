"""Exception types shared across the toolkit.

Every failure mode a caller is expected to branch on gets its own class;
plain ValueError is reserved for malformed arguments that indicate a bug
at the call site rather than a property of the input system.
"""


class LiesteerError(Exception):
    """Base class for all structured toolkit errors."""


class CutLocusError(LiesteerError):
    """Principal matrix log requested at (or too close to) an eigenvalue -1."""


class NonClosedBasisError(LiesteerError):
    """A bracket left the span of the supplied basis, so no structure table exists."""


class GridError(LiesteerError):
    """Parameter grid is empty, has duplicate points, or leaves the allowed box."""


class DegreeTooHighError(LiesteerError):
    """Polynomial design matrix too ill-conditioned at the requested degree bound."""


class DegreeInsufficientError(LiesteerError):
    """Fit at the degree bound cannot meet the requested tolerance."""


class CompileDepthError(LiesteerError):
    """Bracket word nesting exceeds the configured compile depth limit."""


class RootDataError(LiesteerError):
    """Supplied root datum violates the sl(2) bracket relations."""


class CoverIncompleteError(LiesteerError):
    """Union of the supplied triples fails to span the ambient algebra."""


class SpecError(LiesteerError):
    """System description file or object is malformed or out of the supported range."""


class SteeringError(LiesteerError):
    """Steering construction cannot be carried out for the given system."""
