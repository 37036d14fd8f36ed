"""Exception types shared across the package."""


class GMSAError(Exception):
    """Base class for all errors raised by :mod:`gmsa`."""


class DomainError(GMSAError, ValueError):
    """A point lies outside the unit cube."""


class NoParentError(GMSAError, ValueError):
    """A level-0 cube was asked for its parent."""


class LevelError(GMSAError, ValueError):
    """A requested level exceeds the supported maximum."""


class DivergenceError(GMSAError, FloatingPointError):
    """A TD update produced a non-finite value."""


class PhaseTimeoutError(GMSAError, RuntimeError):
    """A learning phase hit its step cap without meeting the patience rule."""


class SingularSystemError(GMSAError, ArithmeticError):
    """The projected Bellman system has no unique solution."""


class ConfigError(GMSAError, ValueError):
    """Invalid experiment configuration."""
