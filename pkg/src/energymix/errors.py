"""Exception types shared across the package."""


class BudgetInfeasibleError(ValueError):
    """A per-node budget is below some node's computation cost."""


class DesignFailureError(RuntimeError):
    """A mixing design could not reach a divergence below one.

    The partially built result is attached as ``result`` so callers can
    still inspect the candidate set and the divergence history.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoPlanError(RuntimeError):
    """Every point of a planning grid has an infinite objective."""


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    ``violations`` holds every problem found, each as ``"path: message"``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
