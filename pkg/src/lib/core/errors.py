"""
Exception hierarchy shared by every package.

Library code raises these; only the CLI maps them to process exit codes
through the ``exit_code`` class attribute.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

if TYPE_CHECKING:
    from ...model.params import ModelParams
    from ...schemas.reports import TrainHistory


class RPRError(Exception):
    """Base class of all recommender errors"""

    exit_code: int = 2


class UsageError(RPRError):
    """Bad command-line usage"""

    exit_code = 1


class ConfigError(UsageError):
    """Invalid or inconsistent configuration"""


class DataError(RPRError):
    """Input data or artifact cannot be used"""

    exit_code = 2


class RecordParseError(DataError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: cannot decode record ({detail})")
        self.line_no = line_no


class RecordSchemaError(DataError):
    def __init__(self, line_no: int, field: str, detail: str = "missing field"):
        super().__init__(f"line {line_no}: {detail} '{field}'")
        self.line_no = line_no
        self.field = field


class EmbeddingFormatError(DataError):
    def __init__(
        self, line_no: int, expected: int = 0, found: int = 0, detail: str = ""
    ):
        super().__init__(
            f"embedding file line {line_no}: "
            + (detail or f"expected {expected} values, found {found}")
        )
        self.line_no = line_no


class SplitInfeasibleError(DataError):
    """Coverage cannot be satisfied without emptying the test partition"""


class UnknownEntityError(DataError, LookupError):
    def __init__(self, kind: str, key: str):
        super().__init__(f"unknown {kind} id: {key!r}")
        self.kind = kind
        self.key = key


class CheckpointError(DataError):
    """Checkpoint file is truncated, mismatched or of another format version"""


class ArtifactNotFoundError(DataError, FileNotFoundError):
    def __init__(self, path: Any):
        super().__init__(f"artifact not found: {path}")
        self.path = path


class ShapeError(RPRError, ValueError):
    """Operand shapes disagree"""


class TokenIndexError(ShapeError, IndexError):
    """Token id outside the embedding table"""


class OracleError(RPRError):
    def __init__(self, name: str, index: tuple[int, ...]):
        super().__init__(f"non-finite objective while probing {name}{list(index)}")
        self.name = name
        self.index = index


class DivergenceError(RPRError):
    """Non-finite loss or gradient during optimisation"""

    exit_code = 3

    def __init__(
        self,
        batch_index: int,
        message: str = "non-finite loss",
        params: Optional["ModelParams"] = None,
        history: Optional["TrainHistory"] = None,
    ):
        super().__init__(f"{message} at batch {batch_index}")
        self.batch_index = batch_index
        self.params = params
        self.history = history
