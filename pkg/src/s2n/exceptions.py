"""Exception types raised across the package.

Every error carries a machine-parseable ``code`` used by the CLI to emit
stable ``E_*`` prefixes and exit codes.
"""


class S2NError(Exception):
    """Base class for all package errors."""

    code = "E_VALIDATE"


class MissingFileError(S2NError):
    code = "E_IO"


class ParseError(S2NError):
    code = "E_PARSE"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NodeIdOutOfRangeError(S2NError):
    pass


class SelfLoopRejectedError(S2NError):
    pass


class AsymmetricEdgeListError(S2NError):
    pass


class DuplicateEdgeError(S2NError):
    pass


class DegenerateGraphError(S2NError):
    pass


class InfeasibleConfigError(S2NError):
    pass


class DatasetValidationError(S2NError):
    """Raised when a loaded dataset fails invariant validation."""

    def __init__(self, report):
        super().__init__(
            "dataset failed validation:\n" + "\n".join(str(v) for v in report.violations)
        )
        self.report = report


class EmptyInputError(S2NError):
    pass


class EmptySplitError(S2NError):
    pass


class NoEdgesError(S2NError):
    pass


class WrongLabelKindError(S2NError):
    pass


class AllNodesIsolatedError(S2NError):
    pass


class ShapeMismatchError(S2NError):
    code = "E_SHAPE"


class EmptyMemberSetError(S2NError):
    pass


class ClockUnavailableError(S2NError):
    pass
