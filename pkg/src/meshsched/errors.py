class ContractViolation(RuntimeError):
    """Raised when an operation is called outside its documented precondition."""


class ConfigError(ValueError):
    """Invalid simulation or topology configuration.

    ``path`` names the offending field, e.g. ``flows[2].source``.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class InvariantViolation(RuntimeError):
    """A runtime invariant (conservation, capacity, deadline) failed during a run."""
