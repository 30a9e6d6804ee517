"""Exception types shared across the package."""


class FracsseError(Exception):
    """Base class for package-specific failures."""


class DomainError(FracsseError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(FracsseError, ValueError):
    """A configuration value violates a documented constraint."""


class NumericalError(FracsseError, RuntimeError):
    """A numerical procedure failed to reach its accuracy or convergence target."""


class EstimationError(FracsseError, RuntimeError):
    """A statistical estimator received degenerate or insufficient input."""
