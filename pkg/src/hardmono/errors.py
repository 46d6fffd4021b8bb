"""Exception types shared across the package."""


class HardMonoError(Exception):
    """Base class for all package errors."""


class DimensionError(HardMonoError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(HardMonoError, ValueError):
    """A caller violated an operation's precondition."""


class NumericError(HardMonoError, ArithmeticError):
    """NaN or otherwise unusable numbers were encountered."""


class DegenerateLatticeError(NumericError):
    """A forward row carries no probability mass."""


class VocabularyError(HardMonoError, KeyError):
    """A symbol or index is outside the vocabulary."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "vocabulary error"


class ConfigurationError(HardMonoError, ValueError):
    """Model configuration is inconsistent."""


class DataError(HardMonoError, ValueError):
    """Input data could not be parsed."""
