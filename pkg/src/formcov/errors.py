"""Exception types raised across the package."""


class FormcovError(Exception):
    """Base class for all package errors."""


class NoFeasibleProjection(FormcovError):
    """No point of the connection-region union lies in the feasible space."""


class ProjectionFailed(FormcovError):
    def __init__(self, agent, message=""):
        self.agent = agent
        super().__init__(message or f"projection failed for agent {agent}")


class DimensionMismatch(FormcovError, ValueError):
    pass


class NotATree(FormcovError, ValueError):
    pass


class Disconnected(FormcovError):
    """Raised when a path query is made on a disconnected formation graph."""


class NotConnectedInput(FormcovError):
    pass


class NoFeasibleStart(FormcovError):
    pass


class ConnectivityLost(FormcovError, AssertionError):
    """Internal invariant violation: a committed formation is disconnected."""


class ParseError(FormcovError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(FormcovError, ValueError):
    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class IoError(FormcovError, OSError):
    pass
