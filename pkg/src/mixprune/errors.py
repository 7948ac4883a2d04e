"""Exception hierarchy and process exit codes.

Every error raised by this package derives from :class:`MixpruneError`, so
callers can catch one type at the pipeline boundary.  The CLI maps error
classes onto stable exit codes via :func:`exit_code_for`.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4
EXIT_IO = 5


class MixpruneError(Exception):
    """Base class for all errors raised by mixprune."""


class ShapeError(MixpruneError):
    """Operands have incompatible or malformed dimensions."""


class ValidationError(MixpruneError):
    """Input data violates a documented invariant (manifest, finiteness, ...)."""


class ConfigError(MixpruneError):
    """A configuration value is unknown or out of its documented range."""


class NumericalError(MixpruneError):
    """A numerical operation failed (bad pivot, singular kept submatrix, ...)."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization hit a non-positive pivot.

    ``suggested_damp_percent`` tells the caller what dampening to retry with:
    ten times the dampening already applied, floored at 0.01.
    """

    def __init__(self, message: str, suggested_damp_percent: float | None = None):
        super().__init__(message)
        self.suggested_damp_percent = suggested_damp_percent


class BudgetError(MixpruneError):
    """A sparsity budget cannot be met under the given clip bounds."""


class FormatError(MixpruneError):
    """A byte stream is not a valid container (bad magic, duplicate names, ...)."""


class VersionError(FormatError):
    """The container declares a format version this reader does not support."""


class CorruptionError(FormatError):
    """The container is structurally damaged (bad offsets, truncation, ...)."""


def exit_code_for(err: BaseException) -> int:
    """Map an exception to the documented CLI exit code."""
    if isinstance(err, (FormatError, OSError)):
        return EXIT_IO
    if isinstance(err, BudgetError):
        return EXIT_BUDGET
    if isinstance(err, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(err, (ShapeError, ValidationError, ConfigError)):
        return EXIT_VALIDATION
    return 1


def add_layer_context(err: MixpruneError, layer_name: str) -> MixpruneError:
    """Prefix an error message with the layer it occurred in, preserving type."""
    if err.args:
        err.args = (f"layer '{layer_name}': {err.args[0]}",) + err.args[1:]
    else:
        err.args = (f"layer '{layer_name}'",)
    return err
