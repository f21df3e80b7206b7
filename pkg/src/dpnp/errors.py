"""Exception hierarchy shared by the solvers and the command line."""


class DPNPError(Exception):
    """Base class for all solver errors."""


class CompatibilityViolation(DPNPError):
    """Pure-Neumann data whose sources and boundary fluxes do not balance."""

    def __init__(self, message, imbalance=None):
        super().__init__(message)
        self.imbalance = imbalance


class NonConvergence(DPNPError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, history=None):
        super().__init__(message)
        self.iterations = iterations
        self.history = list(history) if history is not None else []


class OuterNonConvergence(NonConvergence):
    """The Gauss -> Darcy -> transport fixed-point loop did not settle."""


class NegativeConcentration(DPNPError):
    """A transport solve produced a concentration below the rounding floor."""

    def __init__(self, message, species=None, value=None):
        super().__init__(message)
        self.species = species
        self.value = value


class ConfigError(DPNPError):
    """Malformed scenario configuration; ``line`` points into the source text."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
