"""Exception types; the CLI maps each to a distinct exit code."""


class EpifuseError(Exception):
    exit_code = 1


class ConfigError(EpifuseError, ValueError):
    exit_code = 2


class DataError(EpifuseError, ValueError):
    exit_code = 3


class NumericalError(EpifuseError, RuntimeError):
    exit_code = 4


class ChainFailure(NumericalError):
    """A Markov chain could not start or stalled after adaptation."""
