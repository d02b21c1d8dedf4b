"""Exception hierarchy shared across the engine."""


class PipeforgeError(Exception):
    """Base class for all engine errors."""


class CatalogError(PipeforgeError):
    """Catalog document violates an invariant (duplicate id, bad category, ...)."""


class UnknownPrimitiveError(PipeforgeError):
    """A pipeline references an id missing from the active catalog."""


class IllegalActionError(PipeforgeError):
    """An edit action was applied in a state where it is not legal."""


class ReplayError(PipeforgeError):
    """A recorded trace failed to replay; carries the failing move index."""

    def __init__(self, move: int, reason: str):
        super().__init__(f"replay failed at move {move}: {reason}")
        self.move = move
        self.reason = reason


class DatasetError(PipeforgeError):
    """Dataset file malformed or unusable for the declared task."""


class CheckpointError(PipeforgeError):
    """Checkpoint file unreadable or shaped for a different catalog."""


class TrainingNumericsError(PipeforgeError):
    """NaN/Inf detected in a loss term; names the offending term."""

    def __init__(self, term: str):
        super().__init__(f"non-finite value in loss term: {term}")
        self.term = term


class NotFittedError(PipeforgeError):
    """primitive_apply called before primitive_fit."""


class ProtocolError(PipeforgeError):
    """External-evaluator wire protocol violation."""


class ConfigError(PipeforgeError):
    """Experiment config file missing or inconsistent."""
