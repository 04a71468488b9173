"""Exception hierarchy shared by every module of the package."""


class KGDiracError(Exception):
    """Base class for all errors raised by kgdirac."""


class SymbolSingular(KGDiracError):
    pass


class OrderTooHigh(KGDiracError):
    pass


class GridMismatch(KGDiracError):
    pass


class AlgebraMismatch(KGDiracError):
    pass


class ValidationError(KGDiracError, ValueError):
    """A configuration or parameter invariant is violated."""


class InvalidOverride(ValidationError):
    pass


class ProfileViolation(ValidationError):
    pass


class ParseError(KGDiracError, ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UnresolvedField(KGDiracError):
    pass


class QuadratureFail(KGDiracError):
    pass


class LowerBoundViolated(KGDiracError):
    pass


class DegenerateData(KGDiracError):
    pass


class NoConvergence(KGDiracError):
    def __init__(self, message: str, contraction_factor: float | None = None):
        self.contraction_factor = contraction_factor
        super().__init__(message)


class LowerBoundLost(KGDiracError):
    pass


class UnstableStep(KGDiracError):
    pass
