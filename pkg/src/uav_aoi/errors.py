"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, parameter set, or input file.

    Subclasses ValueError so library callers that only know stdlib
    exceptions still catch it; the CLI maps it to exit code 1.
    """


class InfeasibleRateError(ConfigError):
    """Uplink rate too low for even one device to finish a packet per slot."""
