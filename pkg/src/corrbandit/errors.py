"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition."""


class BudgetViolation(RuntimeError):
    """A corruption or verification budget would be exceeded."""


class InstanceGenerationError(RuntimeError):
    """Rejection sampling could not satisfy the requested gap floor."""


class ProtocolStateError(RuntimeError):
    """Protocol bookkeeping was driven out of order."""


class AuditFailure(RuntimeError):
    """An episode violated a budget constraint or an accounting identity."""


class UsageError(ValueError):
    """Malformed configuration or command-line input."""
