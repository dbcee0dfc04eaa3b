"""Exception types shared across the package."""


class PlateScatterError(Exception):
    """Base class for all library errors."""


class SingularMatrixError(PlateScatterError):
    """Interaction matrix is numerically singular (pivot below threshold)."""


class ResonantSingularError(PlateScatterError):
    """Undamped oscillator driven exactly at its natural frequency."""


class InvalidGeometryError(PlateScatterError):
    """Degenerate geometry: coincident scatterers, empty domains, collapsed fit ranges."""


class OutOfDomainError(PlateScatterError):
    """Spline evaluated outside its fitted radius range."""


class CentroidSingularError(PlateScatterError):
    """Cluster centroid coincides with the forcing location; regularizer undefined."""


class DegenerateChannelError(PlateScatterError):
    """Zero-variance channel cannot be z-normalized."""


class AllStartsFailedError(PlateScatterError):
    """Every optimization start aborted on repeated solver failures."""


class TrainingDivergedError(PlateScatterError):
    """Non-finite loss encountered; the partial history is attached."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class ConfigError(PlateScatterError):
    """Invalid or unknown configuration content."""
