"""Exception taxonomy shared across the package.

The command-line runner maps these onto exit codes: bad inputs and bad
configuration exit 1, numeric failures exit 2, and operating-system I/O
errors (plain OSError) exit 3.
"""


class FriendlyTrainError(Exception):
    """Base class for every error raised by this package."""


class InputError(FriendlyTrainError, ValueError):
    """A caller-supplied value is invalid (bad argument, label, or field)."""


class ConfigError(InputError):
    """An experiment configuration failed validation.

    The message always names the offending field so the user can fix the
    config file without reading a traceback.
    """


class ShapeError(InputError):
    """Tensor shapes do not chain or do not match a declared contract."""


class ParseError(InputError):
    """A data file could not be parsed; the message carries the line number."""


class NumericFailure(FriendlyTrainError, ArithmeticError):
    """A non-finite value appeared where only finite numbers are allowed.

    Raised with enough context (layer name, inner-step index) to locate
    the blow-up. Partial results written before the failure are kept.
    """


class ContractViolation(FriendlyTrainError, RuntimeError):
    """An internal API contract was broken, e.g. a backward cache reused."""
