"""Exception types shared across the package.

Every error raised by feasmap derives from :class:`FeasmapError`; the CLI and
the HTTP service map the subclasses onto exit codes / status payloads via
``error_kind``.
"""


class FeasmapError(Exception):
    """Base class for all feasmap errors."""

    error_kind = "error"


class InvalidArgumentError(FeasmapError, ValueError):
    """Malformed input: dimension mismatch, empty data, bad range."""

    error_kind = "invalid-argument"


class UnsupportedDimensionError(InvalidArgumentError):
    """Requested dimension exceeds what the generator supports."""

    error_kind = "unsupported-dimension"


class OutOfDomainError(FeasmapError, ValueError):
    """Query point lies outside the set the operation is defined on."""

    error_kind = "out-of-domain"


class DivergenceError(FeasmapError, ArithmeticError):
    """Integration produced a non-finite state."""

    error_kind = "divergence"

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class DegenerateDataError(FeasmapError, ValueError):
    """Training or calibration data contains a single class."""

    error_kind = "degenerate-data"


class EmptyErosionError(FeasmapError, ValueError):
    """Erosion margin swallows the whole set."""

    error_kind = "empty-erosion"

    def __init__(self, message: str, max_margin: float):
        super().__init__(message)
        self.max_margin = max_margin


class MissingBoundaryError(FeasmapError, RuntimeError):
    """Robust query issued before the boundary cloud was extracted."""

    error_kind = "missing-boundary"


class ConfigError(FeasmapError, ValueError):
    """Configuration text failed validation."""

    error_kind = "config"


class StageError(FeasmapError, RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    error_kind = "stage"

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


class InvalidComparisonError(FeasmapError, ValueError):
    """Two run manifests are not comparable."""

    error_kind = "invalid-comparison"
