"""Exception hierarchy shared across the package.

Each exception carries an exit code so the CLI can map failures without
inspecting messages.
"""


class NetMFError(Exception):
    exit_code = 1


class InputError(NetMFError, ValueError):
    """Malformed input files, bad parameters, dimension mismatches."""

    exit_code = 2


class GraphFormatError(InputError):
    pass


class NumericalError(NetMFError, ArithmeticError):
    """A numerical stage could not produce a trustworthy result."""

    exit_code = 3


class RankDeficiencyError(NumericalError):
    pass


class ResourceLimitError(NetMFError, MemoryError):
    exit_code = 4


class StageError(NetMFError):
    """Wraps a failure raised inside one pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        default = 4 if isinstance(cause, MemoryError) else 3
        self.exit_code = getattr(cause, "exit_code", default)
        super().__init__(f"[{stage}] {cause}")
