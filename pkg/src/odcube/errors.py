"""Exception hierarchy shared across the package."""


class OdcubeError(Exception):
    """Base class for all package errors."""


class DomainError(OdcubeError):
    """An argument violates a documented domain constraint."""


class ConfigError(OdcubeError):
    """Bad configuration, e.g. an unknown timezone identifier."""


class SchemaError(OdcubeError):
    """Input data does not match the declared schema."""


class ParseError(OdcubeError):
    """Input file could not be parsed at all."""


class EmptyDatasetError(OdcubeError):
    """Ingestion accepted zero rows."""


class NotFoundError(OdcubeError):
    """A referenced entity (query id, neighborhood, dataset) does not exist."""
