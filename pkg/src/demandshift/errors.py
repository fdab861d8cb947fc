class DemandShiftError(Exception):
    """Base class for all package errors."""


class ConfigError(DemandShiftError):
    pass


class IngestError(DemandShiftError):
    """Input could not be parsed or failed the reject threshold."""


class SpanError(DemandShiftError):
    """A slot or series lies outside (or does not match) the expected span."""


class DegenerateClusteringError(DemandShiftError):
    pass


class NoKneeError(DemandShiftError):
    pass


class ValidationError(DemandShiftError):
    """A statistical test cannot be computed on the given sample."""
