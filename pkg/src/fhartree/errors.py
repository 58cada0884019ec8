"""Exception types raised across the package."""


class ConfigError(ValueError):
    """A parameter lies outside its admissible domain."""


class CapacityError(MemoryError):
    """A requested grid or tensor exceeds the configured capacity bound."""


class UndefinedRatioError(ZeroDivisionError):
    pass


class ConvergenceError(RuntimeError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, msg, last=None, history=None):
        super().__init__(msg)
        self.last = last
        self.history = list(history or [])


class DivergenceError(ConvergenceError):
    pass


class StepSizeError(RuntimeError):
    pass


class PropagationError(RuntimeError):
    """Non-finite amplitudes appeared during time stepping.

    ``checkpoint`` holds the last finite state and ``time`` its time.
    """

    def __init__(self, msg, checkpoint=None, time=None):
        super().__init__(msg)
        self.checkpoint = checkpoint
        self.time = time


class CheckpointError(IOError):
    def __init__(self, msg, offset=None):
        if offset is not None:
            msg = f"{msg} (byte offset {offset})"
        super().__init__(msg)
        self.offset = offset


class VerificationError(AssertionError):
    pass
