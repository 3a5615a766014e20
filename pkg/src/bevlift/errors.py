"""Error types shared across the package.

Every error raised by library code is a subclass of :class:`BevLiftError`,
so the command-line layer can catch one type and map it to a nonzero exit.
Messages are prefixed with the name of the module that detected the problem.
"""


class BevLiftError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(BevLiftError):
    """Invalid configuration: broken invariants, dimension mismatches, bad files."""


class ValidationError(BevLiftError):
    """Invalid runtime data: out-of-range points, nonpositive depths, bad tensors."""


class BenchmarkError(BevLiftError):
    """Benchmark aborted: engines disagree or an instance is unusable."""
