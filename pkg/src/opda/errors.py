"""Exception hierarchy shared across the package."""


class OpdaError(Exception):
    """Base class for all library errors."""


class DimensionError(OpdaError, ValueError):
    pass


class ArgumentError(OpdaError, ValueError):
    pass


class UnsupportedError(OpdaError):
    pass


class DivergenceError(OpdaError, ArithmeticError):
    """Iterate became non-finite or the objective blew up."""

    def __init__(self, message, step=None, epoch=None):
        super().__init__(message)
        self.step = step
        self.epoch = epoch


class OracleError(OpdaError):
    """The reference solver failed to reach its tolerance."""


class ParseError(OpdaError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(OpdaError, ValueError):
    pass


class ConfigError(OpdaError, ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
