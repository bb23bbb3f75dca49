"""Exception types raised across the package."""


class VPFPError(Exception):
    pass


class NonConvergence(VPFPError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ZeroMass(VPFPError):
    pass


class TridiagonalFailure(VPFPError):
    pass


class AbortOnLeak(VPFPError):
    pass


class VacuumBreach(VPFPError):
    pass


class NonpositiveReference(VPFPError):
    pass


class MassMismatch(VPFPError):
    pass


class NonpositiveValue(VPFPError):
    pass


class GridTooSmall(VPFPError, ValueError):
    """Velocity domain too narrow for the requested Maxwellian."""
