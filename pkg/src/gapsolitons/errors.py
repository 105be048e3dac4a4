"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3 and resolution-guard failures with 4.
"""


class GapSolitonError(Exception):
    """Base class for all package errors."""


class ConfigError(GapSolitonError, ValueError):
    """Invalid user input: malformed config, violated preconditions."""


class NumericalError(GapSolitonError, RuntimeError):
    """A solver failed to converge or hit an inconsistent state."""


class DegenerateModeError(NumericalError):
    """An operation requiring a simple eigenvalue met a degenerate one."""


class SingularSymbolError(NumericalError):
    """The shifted CME symbol is (nearly) singular at some wavevector."""


class ResolutionError(GapSolitonError, RuntimeError):
    """A grid is too small or too coarse for the field it must carry."""


class StageError(GapSolitonError):
    """Pipeline stage failure; carries the machine-readable stage name."""

    def __init__(self, stage, message, exit_code=3):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code
