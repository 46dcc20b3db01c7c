"""Exception hierarchy shared by the library and the command line."""


class EcoTrajError(Exception):
    """Base class; ``category`` is the machine-readable failure family."""

    category = "internal"


class DomainError(EcoTrajError, ValueError):
    """An argument lies outside the mathematical domain of an operation.

    ``code`` names the violated condition (e.g. ``"SIMPLEX_BOUNDARY"``).
    """

    category = "domain"

    def __init__(self, message, code="DOMAIN"):
        super().__init__(message)
        self.code = code


class StructureError(EcoTrajError, ValueError):
    category = "structure"


class DataError(EcoTrajError, ValueError):
    category = "data"


class ConfigError(EcoTrajError, ValueError):
    category = "config"


class NumericalError(EcoTrajError, ArithmeticError):
    """Non-finite or non-positive-definite quantities during sampling."""

    category = "numeric"

    def __init__(self, message, iteration=None, block=None):
        if iteration is not None or block is not None:
            message = f"{message} (iteration={iteration}, block={block})"
        super().__init__(message)
        self.iteration = iteration
        self.block = block
