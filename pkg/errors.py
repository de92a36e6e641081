# errors.py
"""Exception hierarchy for the toolkit."""

from typing import Optional


class RcmToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(RcmToolkitError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}, column {column}")
        prefix = f"[{'; '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class GraphError(RcmToolkitError):
    """Motif is malformed, disconnected, too large, or mislabeled."""


class DimensionMismatchError(RcmToolkitError):
    pass


class CellSizeError(RcmToolkitError):
    """Query radius exceeds the cell size of the index."""


class InteractionRangeError(RcmToolkitError):
    """Cutoff radius is comparable to the torus itself."""


class EnumerationError(RcmToolkitError):
    """Embedding total not divisible by the automorphism count."""


class IntegrationError(RcmToolkitError):
    pass


class SupportError(RcmToolkitError):
    """Profile support does not fit in the observation window."""


class RegimeError(RcmToolkitError):
    pass


class PartitionSizeError(RcmToolkitError):
    """Set-partition enumeration requested beyond the size guard."""


class SimulationError(RcmToolkitError):
    """A replication failed; carries the seed so it can be replayed."""

    def __init__(self, message: str, seed: Optional[int] = None, replication: Optional[int] = None):
        self.seed = seed
        self.replication = replication
        super().__init__(f"{message} (replication={replication}, seed={seed})")

    def __reduce__(self):
        return _rebuild_simulation_error, (self.args[0], self.seed, self.replication)


def _rebuild_simulation_error(formatted: str, seed: Optional[int], replication: Optional[int]) -> SimulationError:
    error = SimulationError.__new__(SimulationError)
    Exception.__init__(error, formatted)
    error.seed = seed
    error.replication = replication
    return error
