"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for input/validation problems, 3 for numerical failures and 4 for
coverage problems in the conditional bootstrap.
"""

from __future__ import annotations


class CondTauError(Exception):
    exit_code = 1
    kind = "error"

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ValidationError(CondTauError, ValueError):
    exit_code = 2
    kind = "validation"


class IngestionError(ValidationError):
    kind = "ingestion"

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(row=self.row, column=self.column)
        return out


class InsufficientSubsampleError(ValidationError):
    """A box holds fewer than two observations."""

    kind = "insufficient_subsample"

    def __init__(self, box: int, count: int, message: str | None = None):
        if message is None:
            message = f"box {box} has {count} member(s); at least 2 are required"
        super().__init__(message)
        self.box = box
        self.count = count

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(box=self.box, count=self.count)
        return out


class DegenerateBoxError(InsufficientSubsampleError):
    kind = "degenerate_box"


class NumericalError(CondTauError, ArithmeticError):
    exit_code = 3
    kind = "numerical"


class SingularMatrixError(NumericalError):
    kind = "singular_matrix"


class CoverageError(CondTauError):
    exit_code = 4
    kind = "coverage"
