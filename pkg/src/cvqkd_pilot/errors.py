"""Exception hierarchy.

Configuration problems (bad parameters, bad config files) derive from
``ConfigurationError``; failures of the simulated physics or DSP chain
(sync loss, calibration failure, unphysical covariance) derive from
``SimulationError``. The CLI maps the two families to distinct exit codes.
"""


class ConfigurationError(ValueError):
    """Invalid configuration or parameter combination."""


class ParameterError(ConfigurationError):
    """A function argument is outside its valid range."""


class SimulationError(RuntimeError):
    """The simulated system failed in a physically meaningful way."""


class DegenerateInputError(SimulationError):
    pass


class CalibrationError(SimulationError):
    pass


class PilotNotFoundError(SimulationError):
    pass


class SyncFailureError(SimulationError):
    pass


class FrameSyncError(SimulationError):
    pass


class ChannelEstimationError(SimulationError):
    pass


class PhysicalityError(SimulationError):
    pass


class CopyFailure(SimulationError):
    """Wraps a failure raised while processing one ensemble copy."""

    def __init__(self, copy_index: int, cause: BaseException):
        super().__init__(f"copy {copy_index}: {type(cause).__name__}: {cause}")
        self.copy_index = copy_index
        self.cause = cause
