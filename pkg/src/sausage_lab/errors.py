"""Exception hierarchy shared by every sausage_lab module."""


class SausageLabError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(SausageLabError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class DimensionError(DomainError):
    pass


class SingularityError(DomainError):
    pass


class EmptyWindowError(DomainError):
    pass


class InsufficientDataError(DomainError):
    pass


class NumericalError(SausageLabError, ArithmeticError):
    """A numerical procedure could not reach its target accuracy."""


class ToleranceNotMetError(NumericalError):
    pass


class MemoryBudgetError(NumericalError, MemoryError):
    """The requested resolution would exceed the configured voxel budget."""


class OutputError(SausageLabError, OSError):
    """A report or manifest could not be written or read."""
