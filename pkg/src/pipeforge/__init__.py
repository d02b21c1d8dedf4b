"""pipeforge: self-play synthesis of tabular ML pipelines.

A single-player edit game over pipeline primitives, searched by a
policy/value-guided Monte-Carlo tree search and improved by iterated
self-play.  Every synthesized pipeline carries a replayable edit trace.
"""

from .catalog import (
    Catalog,
    Category,
    PrimitiveSpec,
    TaskKind,
    default_catalog,
    load_catalog,
    validate_pipeline,
)
from .game import (
    EditAction,
    GameRules,
    GameState,
    MetaFeatures,
    Metric,
    TaskSpec,
    action_space_size,
    apply_action,
    encode_state,
    initial_state,
    is_terminal,
    legal_actions,
    replay_trace,
)

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "Category",
    "PrimitiveSpec",
    "TaskKind",
    "default_catalog",
    "load_catalog",
    "validate_pipeline",
    "EditAction",
    "GameRules",
    "GameState",
    "MetaFeatures",
    "Metric",
    "TaskSpec",
    "action_space_size",
    "apply_action",
    "encode_state",
    "initial_state",
    "is_terminal",
    "legal_actions",
    "replay_trace",
    "__version__",
]
