"""Exception hierarchy shared by the library and the command line.

Each class carries the process exit code the CLI maps it to.
"""


class ShipCrbmError(Exception):
    exit_code = 1


class ValidationError(ShipCrbmError, ValueError):
    """Input data or configuration violates a documented contract."""

    exit_code = 2


class MissingArtifactError(ShipCrbmError, FileNotFoundError):
    """An upstream pipeline stage has not produced the file we need."""

    exit_code = 3


class DivergenceError(ShipCrbmError, ArithmeticError):
    """Training produced non-finite parameters."""

    exit_code = 4
