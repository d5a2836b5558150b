"""Exception hierarchy.

Two fatal branches map onto the CLI exit codes: ``InputError`` (exit 2) for
anything wrong with files, formats, or arguments, and ``DegenerateDataError``
(exit 3) for geometrically unusable data. Filesystem failures are left to the
builtin ``OSError``.
"""


class CellshapesError(Exception):
    """Base class for all package errors."""


class InputError(CellshapesError):
    """Bad input: files, formats, arguments, schemas. CLI exit code 2."""


class DegenerateDataError(CellshapesError):
    """Geometrically unusable data. CLI exit code 3."""


# --- input / format errors -------------------------------------------------

class ParseError(InputError):
    """Malformed file content; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFormat(InputError):
    pass


class MalformedMap(InputError):
    pass


class SchemaError(InputError):
    """Serialized model/feature file does not match the expected schema."""


class InvalidConfig(InputError):
    pass


class InvalidParams(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class TooShort(InputError):
    pass


class TooFewSamples(InputError):
    pass


class LabelOutOfRange(InputError):
    pass


class NonFiniteFeature(InputError):
    pass


class NotNormalized(InputError):
    pass


class InsufficientData(InputError):
    pass


class ModelFamilyMismatch(InputError):
    pass


# --- degenerate-data errors -------------------------------------------------

class EmptyMap(DegenerateDataError):
    pass


class EmptyMask(DegenerateDataError):
    pass


class DegenerateContour(DegenerateDataError):
    pass


# --- warnings ----------------------------------------------------------------

class DegenerateVarianceWarning(UserWarning):
    """PCA input carries (numerically) zero variance."""


class SmallRegionWarning(UserWarning):
    """Label-map region below the minimum traceable size was skipped."""
