"""Exception types raised by the solvers."""


class BosecorrError(Exception):
    pass


class InvalidArgument(BosecorrError, ValueError):
    pass


class DomainError(BosecorrError, ValueError):
    """Argument outside the strip |Im k| < c where the phase and kernel are continued."""


class TailMismatch(BosecorrError, ValueError):
    pass


class WindingAmbiguity(BosecorrError, RuntimeError):
    """Phase of a sampled function jumps too much between neighbouring nodes."""


class GridMismatch(BosecorrError, ValueError):
    pass


class ContourModeError(BosecorrError, ValueError):
    pass


class NoConvergence(BosecorrError, RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class RootEscape(NoConvergence):
    pass


class BranchCollision(NoConvergence):
    pass


class NewtonDivergence(NoConvergence):
    pass


class NoFermiSea(BosecorrError, ValueError):
    pass


class SingularSystem(BosecorrError, RuntimeError):
    pass
