"""Exception types raised across the package."""


class DimeNetError(Exception):
    """Base class for all package errors."""


class DegenerateGeometryError(DimeNetError, ValueError):
    """Coincident atoms or zero-length bond vectors."""


class DomainError(DimeNetError, ValueError):
    """Argument outside the domain of a basis function."""


class UnknownElementError(DimeNetError, KeyError):
    """Atomic number or element symbol not covered by a table."""


class ContractError(DimeNetError, ValueError):
    """A call violated an API precondition (shape, scalar root, head width)."""


class UnregisteredPrimitiveError(DimeNetError, AttributeError):
    """A differentiable program used an operation without a derivative rule."""


class UndefinedMetricError(DimeNetError, ValueError):
    """A metric is undefined for the given inputs (e.g. log of a zero MAE)."""


class ParseError(DimeNetError, ValueError):
    """Malformed input file. ``lineno`` is 1-based when known."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class ConfigError(DimeNetError, ValueError):
    """Unknown or invalid configuration key."""


class CheckpointError(DimeNetError, ValueError):
    """Corrupt or inconsistent checkpoint container."""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint file ends before the manifest says it should."""


class TrainingDivergedError(DimeNetError, RuntimeError):
    """Loss became NaN or infinite during training."""
