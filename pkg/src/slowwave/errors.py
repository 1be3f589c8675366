"""Exception types shared across the pipeline."""


class SlowwaveError(Exception):
    """Base class for all pipeline errors."""


class ShapeMismatch(SlowwaveError):
    pass


class ZeroBaseline(SlowwaveError):
    """Baseline contains non-positive pixels inside the mask; dF/F undefined."""


class BandOutOfRange(SlowwaveError):
    pass


class EmptyMask(SlowwaveError):
    pass


class NonFiniteInput(SlowwaveError):
    pass


class NoConvergence(SlowwaveError):
    pass


class SupportViolation(SlowwaveError):
    """Manufactured potential is not compactly supported inside the mask."""


class ScheduleOverlap(SlowwaveError):
    pass


class MissingUpstream(SlowwaveError):
    """A pipeline stage was invoked before its inputs were produced."""


class DivergedLoss(SlowwaveError):
    def __init__(self, epoch, loss):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class InsufficientSamples(SlowwaveError):
    pass
