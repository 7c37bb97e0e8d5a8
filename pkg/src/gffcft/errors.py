"""Exception types shared across the workbench."""


class GffcftError(Exception):
    """Base class for all workbench errors."""


class CoincidentPointsError(GffcftError):
    """Two field insertions landed on the same point."""


class BoundaryPointError(GffcftError):
    """An interior-only operation received a boundary point."""


class DegenerateMapError(GffcftError):
    """A chart map has vanishing derivative at the evaluation point."""


class CapExceededError(GffcftError):
    """A correlation query exceeds the configured basic-field cap."""


class WindowError(GffcftError):
    """A Laurent window violates its admissibility constraints."""


class HorizonExhaustedError(GffcftError):
    """A Loewner flow ran out of horizon before the tracked event occurred."""


class IntegrabilityError(GffcftError):
    """A screening integral diverges at one of its endpoints."""


class InputError(GffcftError):
    """Malformed user-facing input (JSON query, CLI config)."""
