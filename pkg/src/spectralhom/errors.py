"""Exception types shared across the package."""


class SpectralHomError(ValueError):
    """Base class for all library errors."""


class RegularityError(SpectralHomError):
    """A pattern matrix is singular or otherwise not a valid lattice matrix."""


class CapacityError(SpectralHomError):
    """A size guard for dense reference computations was exceeded."""


class ShapeError(SpectralHomError):
    """Array arguments do not match the pattern they are indexed by."""


class DomainError(SpectralHomError):
    """A numeric parameter lies outside its admissible range."""


class DegenerateGeneratorError(SpectralHomError):
    """A generator does not span an m-dimensional translate space."""


class SingularSystemError(SpectralHomError):
    """A dense reference system could not be solved reliably."""


class GeometryError(SpectralHomError):
    """A microstructure definition is geometrically invalid."""


class IngestionError(SpectralHomError):
    """A reference-data file does not match the expected schema or pattern."""


class ConfigError(SpectralHomError):
    """An experiment configuration is invalid or incomplete."""
