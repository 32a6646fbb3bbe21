"""Exception types shared across the package."""


class BeliefDynError(Exception):
    """Base class for all package errors."""


class DomainError(BeliefDynError, ValueError):
    """An argument refers to agents or networks it does not belong to."""


class ConfigurationError(BeliefDynError, ValueError):
    """Unknown function kind, bad selector or invalid parameter."""


class InfeasibleError(BeliefDynError, RuntimeError):
    """An exhaustive computation would exceed its configured size limit."""


class InputFormatError(BeliefDynError, ValueError):
    """A text input (network, profile, schedule, ...) is malformed."""

    def __init__(self, message, source=None, line=None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
