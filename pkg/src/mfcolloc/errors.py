"""Exception types raised by the numerical modules."""


class MfcError(Exception):
    """Base class for all library errors."""


class NumericalError(MfcError):
    """A solver or factorization failed on valid-looking input."""


class NonPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class SingularPivot(NumericalError):
    pass


class NewtonDivergence(NumericalError):
    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class RankDeficient(NumericalError):
    pass


class NearDegenerateEigenvalue(NumericalError):
    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair


class DegenerateBasis(NumericalError):
    pass


class InputError(MfcError, ValueError):
    """Arguments violate a documented precondition."""


class OutOfRange(InputError):
    pass


class DimMismatch(InputError):
    pass


class InvalidMesh(InputError):
    pass


class BadCount(InputError):
    pass


class MeshMismatch(InputError):
    pass


class GridMismatch(InputError):
    pass


class NodeCountOverflow(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NodeFailure(MfcError):
    """Wraps a solver error raised while processing one collocation node or sample."""

    def __init__(self, index, cause):
        super().__init__(f"node {index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause
