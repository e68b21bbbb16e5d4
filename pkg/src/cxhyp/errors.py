"""Exception types raised across the package."""


class CxhypError(Exception):
    """Base class for all package errors."""


class NonFiniteInput(CxhypError, ValueError):
    pass


class SingularInput(CxhypError, ValueError):
    pass


class BranchCut(CxhypError, ValueError):
    """An eigenvalue sits on the closed negative real axis."""


class NormViolation(CxhypError, ValueError):
    pass


class BoundaryDegeneracy(CxhypError, ValueError):
    pass


class DomainViolation(CxhypError, ValueError):
    pass


class ConePoint(CxhypError, ValueError):
    pass


class QuadratureNotConverged(CxhypError, RuntimeError):
    pass


class SupportOverflow(CxhypError, RuntimeError):
    pass


class BudgetExceeded(CxhypError, RuntimeError):
    pass


class DegenerateFit(CxhypError, ValueError):
    pass


class EigenvaluePairInvalid(CxhypError, ValueError):
    pass


class ConfigInvalid(CxhypError, ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class IoFailure(CxhypError, OSError):
    pass
