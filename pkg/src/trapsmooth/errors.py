class ConfigError(ValueError):
    """Invalid experiment configuration or scan string."""


class ResolutionError(ValueError):
    """Grid too coarse for the requested operator or state."""


class NumericalFailure(RuntimeError):
    """An iterative method failed to converge or a factorization was singular."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}
