"""Exception hierarchy shared by all modules."""


class FlimError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FlimError, ValueError):
    """An argument lies outside the domain of a formula."""


class BadRange(FlimError, ValueError):
    """Drive-current limits are inverted or non-positive."""


class AngleListMismatch(FlimError, ValueError):
    """Number of per-PD perturbation angles differs from the PD count."""


class DegenerateGeometry(FlimError, ValueError):
    """An LED and a PD coincide, so the link distance is zero."""


class SubsetInfeasible(FlimError, ValueError):
    """Requested codebook size exceeds the symbol universe."""


class SingularSystem(FlimError, ArithmeticError):
    """The MMSE normal matrix cannot be inverted."""


class ConfigMismatch(FlimError, ValueError):
    """Channel, codebook and detector dimensions disagree."""


class ConfigError(FlimError, ValueError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Config file is not valid sectioned key-value text."""


class ValidationError(ConfigError):
    """Config parsed but violates a field or cross-field invariant."""
