"""Exception types raised across the package."""


class SnailampError(Exception):
    """Base class for all package errors."""


# snail element
class NoMinimumBracketed(SnailampError):
    pass


class HystereticBranchLost(SnailampError):
    pass


class DivergentInductance(SnailampError):
    pass


class HystereticDevice(SnailampError):
    """Raised when a device with alpha > 1/3 is used without the override flag."""


# circuit model
class ConstraintNoConvergence(SnailampError):
    pass


class RootNotBracketed(SnailampError):
    pass


class NoSignChange(SnailampError):
    pass


# harmonic balance
class NonConvergence(SnailampError):
    def __init__(self, message, residual=None, steps=None):
        super().__init__(message)
        self.residual = residual
        self.steps = steps


class AboveInstability(SnailampError):
    pass


class SingularDenominator(SnailampError):
    pass


class TargetUnreachable(SnailampError):
    pass


# virtual experiments
class NoCompressionBelowCeiling(SnailampError):
    pass


class FitWindowTooSmall(SnailampError):
    pass


class BistableBranch(UserWarning):
    """Warning: the driven Duffing response has several steady states."""


# design search
class BudgetExhausted(UserWarning):
    """Warning: search budget ran out; the best-so-far ranking is returned."""


# io
class SchemaError(SnailampError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class UnitError(SchemaError):
    pass
