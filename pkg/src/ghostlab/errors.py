"""Exception types shared across the library."""


class GhostLabError(Exception):
    """Base class for all ghostlab errors."""


class ParameterError(GhostLabError, ValueError):
    """Invalid argument value or violated precondition."""


class ShapeError(GhostLabError, ValueError):
    """Mismatched grid, basis or series dimensions."""


class DependenceError(GhostLabError, ValueError):
    """A basis member is (numerically) linearly dependent on earlier ones."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"member {index} is linearly dependent on earlier members")


class FormatError(GhostLabError, ValueError):
    """Malformed on-disk file."""
