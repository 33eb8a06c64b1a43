"""Exception types. Plain ``ValueError`` is used for bad arguments."""


class ConfigurationError(ValueError):
    """Inconsistent or out-of-range configuration (CLI exit code 2)."""


class FormatError(ValueError):
    """Malformed input file (CLI exit code 3)."""


class EstimationError(RuntimeError):
    """A data-driven estimate could not be formed (e.g. no signal above noise)."""


class BracketError(RuntimeError):
    """Root bracketing failed for a Bessel zero."""
