"""Exception types.

Numerical failures inside a run are caught by the evolution loop and turned
into a termination reason; they only escape from the low-level operations.
"""


class EvthError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveDefinite(EvthError):
    """A metric lost positive-definiteness at ``index`` (a grid point)."""

    def __init__(self, index, minor=None):
        self.index = tuple(int(i) for i in index)
        self.minor = minor
        msg = f"metric not positive-definite at grid point {self.index}"
        if minor is not None:
            msg += f" (leading minor {minor} <= 0)"
        super().__init__(msg)


class NonPositiveLapse(EvthError):
    """The lapse (or the gauge density) is not strictly positive."""

    def __init__(self, index=None):
        self.index = None if index is None else tuple(int(i) for i in index)
        where = "" if index is None else f" at grid point {self.index}"
        super().__init__(f"lapse not positive{where}")


class StepFailed(EvthError):
    """An RK stage produced an invalid state; ``stage`` is 1..4."""

    def __init__(self, stage, cause=None):
        self.stage = stage
        self.cause = cause
        super().__init__(f"RK4 stage {stage} failed: {cause}")


class DtUnderflow(EvthError):
    def __init__(self, dt, floor):
        self.dt = dt
        self.floor = floor
        super().__init__(f"time step {dt!r} fell below the floor {floor!r}")


class DomainCrushed(EvthError):
    """The shrinking domain reached zero radius."""


class ScaleTooLarge(EvthError):
    """A ball scale exceeds a quarter of the period and would wrap."""


class AmplitudeTooLarge(EvthError):
    pass


class ConfigError(EvthError):
    pass


class CheckpointError(EvthError):
    pass
