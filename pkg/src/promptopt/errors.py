"""Exception taxonomy for the whole package.

Errors are grouped by origin so callers can react coarsely (e.g. the CLI
maps config vs. backend vs. data failures to distinct exit codes) while
tests can assert on the precise class.
"""

from __future__ import annotations


class PromptOptError(Exception):
    """Base class for all package errors."""


# --- DSL parsing -------------------------------------------------------------

class DslParseError(PromptOptError):
    """A program document could not be turned into an AST."""


class YamlError(DslParseError):
    """Malformed YAML, non-JSON data values, or nesting beyond the depth cap."""


class UnknownBlockError(DslParseError):
    """Unrecognized block kind or key, with the offending document path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class DuplicateDefError(DslParseError):
    def __init__(self, name: str, path: str) -> None:
        super().__init__(f"{path}: duplicate definition of {name!r} in the same scope")
        self.name = name
        self.path = path


# --- Templates ---------------------------------------------------------------

class TemplateSyntaxError(PromptOptError):
    """Bad interpolation syntax; ``offset`` is the character position in the source."""

    def __init__(self, offset: int, message: str) -> None:
        super().__init__(f"at offset {offset}: {message}")
        self.offset = offset


class UnboundPathError(PromptOptError):
    def __init__(self, path: str) -> None:
        super().__init__(f"unbound path: {path}")
        self.path = path


# --- Model-output parsing ----------------------------------------------------

class UnparseableError(PromptOptError):
    """Model output is not JSON even after the repair pipeline."""


class SchemaViolationError(PromptOptError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


# --- Interpreter -------------------------------------------------------------

class LimitExceededError(PromptOptError):
    """Model-call or wall-clock budget exhausted during execution."""


class UnboundFunctionError(PromptOptError):
    def __init__(self, name: str) -> None:
        super().__init__(f"no function or builtin named {name!r}")
        self.name = name


class BlockExecutionError(PromptOptError):
    """Wraps a lower-level failure with the path of the block being executed."""

    def __init__(self, block_path: str, cause: Exception) -> None:
        super().__init__(f"{block_path}: {cause}")
        self.block_path = block_path
        self.cause = cause


# --- Backends ----------------------------------------------------------------

class BackendError(PromptOptError):
    pass


class NoRuleMatchedError(BackendError):
    """Scripted backend had no matching rule and no default."""


class BackendUnavailableError(BackendError):
    """Transport failure that persisted through retries."""


class AuthenticationError(BackendError):
    """Rejected credentials; never retried."""


class ContextOverflowError(BackendError):
    """The server reported that the request exceeded the model context window."""


# --- Tools and sandbox -------------------------------------------------------

class SandboxUnavailableError(PromptOptError):
    """The external code-execution runner could not be located or spoken to."""


class SearchTransportError(PromptOptError):
    """Live search client failed after its retry budget."""


# --- Datasets ----------------------------------------------------------------

class DataError(PromptOptError):
    pass


class DatasetSchemaError(DataError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class InsufficientDataError(DataError):
    pass


# --- Trajectory construction ---------------------------------------------------

class TrajectoryBuildError(PromptOptError):
    pass


class NoExpressionsError(TrajectoryBuildError):
    """Math instance has no annotated calculator expression."""


class NoEvidenceError(TrajectoryBuildError):
    """Claim instance has no evidence articles."""


class MissingTestCaseError(TrajectoryBuildError):
    """Coding instance lacks the prompt test case."""


# --- Patterns and optimizer ----------------------------------------------------

class PatternDemoMismatchError(PromptOptError):
    """Demonstration variant does not fit the requested pattern."""


class ReWOOUnsupportedError(PromptOptError):
    """Plan-then-solve pattern requested for a task that needs execution feedback."""


class EmptySpaceError(PromptOptError):
    """Search space has an empty dimension."""


class ConfigError(PromptOptError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
