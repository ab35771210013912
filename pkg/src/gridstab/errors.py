"""Exception types.

Input problems derive from :class:`InputError`, numerical failures from
:class:`NumericalError`; the command line maps them to exit codes 1 and 2.
"""

from __future__ import annotations


class GridStabError(Exception):
    pass


class InputError(GridStabError, ValueError):
    pass


class NumericalError(GridStabError, ArithmeticError):
    pass


class CaseFormatError(InputError):
    """Invalid case data; carries the offending row number and field when known."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.message = message
        self.row = row
        self.field = field
        parts = [message]
        if row is not None:
            parts.append(f"row {row}")
        if field is not None:
            parts.append(f"field {field!r}")
        super().__init__(" | ".join(parts))


class NotRadial(InputError):
    pass


class NonHomogeneousCase(InputError):
    pass


class InvalidMass(InputError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (final max residual {residual:.3e})")


class SingularJacobian(NumericalError):
    pass


class UnbalancedCase(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(message)


class NoFeasibleBranch(NumericalError):
    pass


class ZeroWeightEdge(NumericalError):
    pass


class NewtonStageFailure(NumericalError):
    pass
