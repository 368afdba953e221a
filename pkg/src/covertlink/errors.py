"""Exception and warning types shared across the package.

The CLI maps these onto process exit codes: ``ConfigError`` -> 2,
``IngestionError`` -> 3, ``DomainError``/``NumericError`` -> 4.
"""


class CovertLinkError(Exception):
    """Base class for all package errors."""


class DomainError(CovertLinkError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class SingularNoiseError(DomainError):
    """Willie's noise floor is zero, so covertness is undefined."""


class DegenerateSignalError(DomainError):
    """The probe carries no photons, so a transmission bound is undefined."""


class CutoffTooSmallError(DomainError):
    """A Fock-space cutoff leaves more trace mass than the tolerance allows."""


class NumericError(CovertLinkError, ArithmeticError):
    """A numerical routine received or produced an invalid matrix."""


class ConfigError(CovertLinkError):
    """A configuration file or parameter combination is invalid."""


class IngestionError(CovertLinkError):
    """An input data file is malformed or incomplete."""


class StructuralError(CovertLinkError, ValueError):
    """Sequence lengths or shapes do not agree."""


class CovertLinkWarning(UserWarning):
    """Flags a result that was clamped, relabelled or otherwise special-cased."""
