"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain an operation is defined on."""


class ConfigError(ValueError):
    """Inconsistent wiring, detector set or run configuration."""


class PhotonLimitError(DomainError):
    """A state exceeds the supported total photon number."""


class ImpossibleHeraldError(DomainError):
    """The requested herald has (numerically) zero probability."""


class NoSignalError(DomainError):
    """A fringe scan produced an all-zero probability pattern."""


class InconsistentVisibilitiesError(DomainError):
    """Swap visibilities admit no real parameter solution."""


class FitError(DomainError):
    """A least-squares fit produced an unusable result."""
