"""Exception types shared across the simulator."""


class NotSkewSymmetric(ValueError):
    """Matrix handed to vee() is not skew-symmetric within tolerance."""


class NonFiniteState(RuntimeError):
    """Integration produced NaN/Inf; signals parameter misconfiguration.

    Carries the tick index when raised from the simulation loop.
    """

    def __init__(self, message: str, tick: int | None = None):
        super().__init__(message if tick is None else f"{message} (tick {tick})")
        self.tick = tick


class ConfigError(ValueError):
    """Configuration schema violation; message names the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NoContact(RuntimeError):
    """Scripted push-and-slide approach never reached the wall."""


class BindError(OSError):
    """Service could not bind its address."""
