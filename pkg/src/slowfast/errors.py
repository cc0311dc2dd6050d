"""Exception hierarchy for slowfast."""


class SlowFastError(Exception):
    """Base class for every error raised by this package."""


# -- model validation -----------------------------------------------------

class ModelError(SlowFastError):
    pass


class DimensionMismatch(ModelError):
    pass


class MomentOutOfRange(ModelError):
    pass


class MomentCollision(ModelError):
    pass


class NonFiniteEvaluation(ModelError):
    pass


# -- expressions ----------------------------------------------------------

class ExprError(SlowFastError):
    pass


class ExprSyntaxError(ExprError):
    """Malformed expression text. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownFunction(ExprError):
    pass


class UnknownVariable(ExprError):
    pass


class UnboundVariable(ExprError):
    pass


class NonFiniteResult(ExprError, ArithmeticError):
    pass


class SpecFileError(SlowFastError):
    pass


# -- numerics -------------------------------------------------------------

class IntegrationError(SlowFastError):
    pass


class NonFiniteState(IntegrationError):
    """The state blew up. ``t_last`` is the last time with a finite state."""

    def __init__(self, message, t_last):
        super().__init__(f"{message} (last finite state at t={t_last!r})")
        self.t_last = t_last


class ToleranceFailure(IntegrationError):
    def __init__(self, message, t_last):
        super().__init__(f"{message} (at t={t_last!r})")
        self.t_last = t_last


class RootError(SlowFastError):
    pass


class NewtonDivergence(RootError):
    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


class SingularJacobian(RootError):
    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


class UnclosedLayer(SlowFastError):
    """A layer opened at ``start`` never re-entered the tube before ``end``."""

    def __init__(self, start, end):
        super().__init__(f"layer opened at t={start!r} does not close before t={end!r}")
        self.start = start
        self.end = end
