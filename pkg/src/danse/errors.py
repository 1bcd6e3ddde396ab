"""Exception types raised by the simulation and analysis layers."""


class InvalidParameterError(ValueError):
    pass


class IntegrationDivergedError(RuntimeError):
    def __init__(self, time, message=None):
        self.time = float(time)
        super().__init__(message or f"non-finite amplitudes at t={self.time:g}")


class UndefinedMomentError(ValueError):
    pass


class NoLocalizationError(ValueError):
    pass


class NoDiffusionError(ValueError):
    pass


class InfiniteLengthError(ValueError):
    pass


class ResonanceError(ZeroDivisionError):
    pass


class NoOverlapError(ValueError):
    pass


class EnsembleFailedError(RuntimeError):
    def __init__(self, n_failed, n_total):
        self.n_failed = n_failed
        self.n_total = n_total
        super().__init__(f"{n_failed} of {n_total} realizations diverged (limit 10%)")


class ConfigError(ValueError):
    """Manifest problem, located by key and (when known) source line."""

    def __init__(self, message, key=None, line=None, source=None):
        self.key = key
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        if key is not None:
            where += f" {key}:" if where else f"{key}:"
        super().__init__(f"{where} {message}".strip())
