"""Exception types shared across the package."""


class FbsimError(Exception):
    """Base class for all package errors."""


class ConfigError(FbsimError):
    """Invalid configuration input: unknown key, malformed file, inconsistent values."""


class BasisSizeError(FbsimError):
    """Requested basis exceeds the configured dimension limit."""


class BasisMismatchError(FbsimError):
    """Operands were built on different bases."""


class StateFormatError(FbsimError):
    """Malformed state-file content."""


class NonHermitianError(FbsimError):
    """Matrix handed to a Hermitian-only routine fails the Hermiticity check."""


class SingularTimeError(FbsimError):
    """Factored propagator evaluated too close to a tangent singularity."""


class SeriesDivergenceError(FbsimError):
    """Operator-exponential series failed to converge within the term budget."""


class TraceDriftError(FbsimError):
    """Density-matrix trace drifted beyond tolerance during integration."""


class TruncationBudgetError(FbsimError):
    """Requested operation would exceed the stated truncation error budget."""


class OracleMismatchError(FbsimError):
    """Cross-check against the exact propagator exceeded tolerance."""
