"""Exception types shared across the package."""


class SimcalError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(SimcalError):
    """A configuration value, option combination, or matrix is invalid."""


class DataFormatError(SimcalError):
    """Input data (CSV files, count tables) violates the expected format."""


class InfeasibleRegionError(SimcalError):
    """A requested credible level set is empty at the given threshold."""
