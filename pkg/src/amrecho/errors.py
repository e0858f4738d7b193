"""Exception hierarchy shared by all modules."""


class AMRError(Exception):
    """Base class. ``stage`` names the protocol stage when known."""

    def __init__(self, message, stage=None):
        self.stage = stage
        if stage:
            message = f"[{stage}] {message}"
        super().__init__(message)


class GridTooCoarse(AMRError):
    pass


class PulseClipped(AMRError):
    pass


class InvalidWindow(AMRError):
    pass


class UnnormalizableDistribution(AMRError):
    pass


class PoleInSupport(AMRError):
    pass


class PoleHit(AMRError):
    pass


class AtAsymptote(AMRError):
    pass


class QuadratureNotConverged(AMRError):
    pass


class BandwidthExceedsComb(AMRError):
    pass


class DepthQuadratureNotConverged(AMRError):
    pass


class DepthTooLowForAsymptotic(AMRError):
    pass


class ScheduleInvalid(AMRError):
    pass


class WrongStage(AMRError):
    pass


class NoRootInBracket(AMRError):
    pass


class StepTooCoarse(AMRError):
    pass


class UnstableGrowth(AMRError):
    pass


class ZeroInput(AMRError):
    pass


class ConfigParseError(AMRError):
    pass


class ConfigValidationError(AMRError):
    pass
