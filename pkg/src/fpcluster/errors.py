"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
ModelError -> 3.
"""


class FpClusterError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FpClusterError):
    """Invalid configuration, option value or usage."""


class SynthSpecError(ConfigError):
    """Invalid synthetic map specification (zero APs, zero samples, ...)."""


class DataError(FpClusterError):
    """Dataset content violates the expected contract."""


class SchemaError(DataError):
    """Column layout does not match the dataset schema."""


class ParseError(DataError):
    """A cell could not be parsed; the message names the row."""


class EmptyDatasetError(DataError):
    """A dataset with zero fingerprint rows."""


class DegenerateDataError(DataError):
    """Data that makes a derived quantity undefined (e.g. no detected AP at all)."""


class UndetectableFingerprintError(DataError):
    """A fingerprint with zero detected APs cannot be assigned to a cluster."""


class ModelError(FpClusterError):
    """A model cannot be built or is missing where one is required."""


class InfeasibleKError(ModelError):
    """Requested more clusters than distinct points in a scope."""


class NoModelError(ModelError):
    """An empty representative table (or missing model) where one is required."""
