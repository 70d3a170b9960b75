"""Exception hierarchy shared by all modules."""


class NRRISError(Exception):
    """Base class for toolkit errors."""


class ConfigError(NRRISError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class NumericalError(NRRISError, ArithmeticError):
    """A computation hit a numerically degenerate case."""


class SingularNetworkError(NumericalError):
    """``Z + I*Z0`` (or an interconnection system) is not invertible."""


class ResonantLoopError(NumericalError):
    """The internal wave loop of a group has no unique solution."""


class DegeneratePatternError(NumericalError):
    """A beampattern has no sidelobe region or no unique peak."""


class RankDeficientChannelError(NumericalError):
    """A channel estimate cannot be inverted by the precoder."""


class ModeError(NRRISError, ValueError):
    """An operation was applied to a surface of the wrong mode."""
