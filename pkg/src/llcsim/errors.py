"""Exception hierarchy shared by the simulator and the analysis tools."""


class LlcSimError(Exception):
    """Base class for every error raised by llcsim."""


class ConfigError(LlcSimError, ValueError):
    """A configuration document or object violates an invariant."""


class ProtocolError(LlcSimError):
    """The memory-hierarchy protocol reached an illegal state."""

    def __init__(self, message, slot=None, core=None):
        if slot is not None:
            message = f"slot {slot}: {message}"
        super().__init__(message)
        self.slot = slot
        self.core = core


class IsolationError(ProtocolError):
    """A core touched LLC state outside its partition."""


class PwbOverflow(ProtocolError):
    """A pending write-back buffer exceeded its configured capacity."""


class ScriptError(LlcSimError, ValueError):
    """A scenario script is inconsistent with the schedule or cache state."""


class CalibrationError(LlcSimError, ValueError):
    """No integral slot width reproduces the requested latency."""
