"""Exception hierarchy shared by all flowerlab modules."""


class FlowerLabError(Exception):
    """Base class for every error raised by this package."""


class DegenerateGerm(FlowerLabError):
    """<a, M> vanishes, so the germ cannot be normalized."""


class NoConvergence(FlowerLabError):
    """An iterative scheme exhausted its budget before meeting its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ZeroCoordinate(FlowerLabError):
    """A negative exponent met a vanishing coordinate."""


class ZeroMultiIndex(FlowerLabError):
    pass


class NotPrimitive(FlowerLabError):
    pass


class BadOrdering(FlowerLabError):
    """Zero entries of m must come after all non-zero entries."""


class OutsidePetalBranch(FlowerLabError):
    """arg(x^m) is outside the angular window of the requested component."""


class OutsidePetal(FlowerLabError):
    pass


class OutsideV(FlowerLabError):
    pass


class BranchError(FlowerLabError):
    pass


class EmptySlice(FlowerLabError):
    pass


class EmptySample(FlowerLabError):
    pass


class CalibrationFailed(FlowerLabError):
    """Calibration could not find admissible petal parameters.

    ``witness`` holds the sample point that violated invariance (if any).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotReached(FlowerLabError):
    pass


class PreconditionViolated(FlowerLabError):
    pass
