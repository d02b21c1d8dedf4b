"""The pipeline-edit game: states, actions, legality, transitions, encoding.

A state is (dataset meta-features, task, pipeline-so-far).  Moves are
positional edits (insert/delete/replace) plus an explicit ``commit`` that
ends the game when the pipeline is estimator-terminated.  Every operation
here is pure; states and actions are immutable values.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace as _replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .catalog import (
    CATEGORY_RANK,
    Catalog,
    Category,
    L_MAX_DEFAULT,
    TaskKind,
    validate_pipeline,
)
from .errors import IllegalActionError, ReplayError

M_MAX_DEFAULT = 12

META_LEN = 16
META_FEATURE_NAMES = (
    "log1p_rows",
    "n_cols",
    "n_numeric",
    "n_categorical",
    "missing_ratio",
    "class_count",
    "class_entropy",
    "majority_class_ratio",
    "mean_col_mean",
    "mean_col_std",
    "mean_abs_skewness",
    "mean_abs_excess_kurtosis",
    "mean_abs_target_correlation",
    "numeric_column_ratio",
    "log1p_rows_per_col",
    "constant_column_ratio",
)
_RATIO_SLOTS = (4, 7, 13, 15)

TASK_ONEHOT_ORDER = (TaskKind.BINARY, TaskKind.MULTICLASS, TaskKind.REGRESSION)


class Metric(str, Enum):
    ACCURACY = "accuracy"
    F1_MACRO = "f1_macro"
    R_SQUARED = "r_squared"


_METRIC_KINDS = {
    Metric.ACCURACY: {TaskKind.BINARY, TaskKind.MULTICLASS},
    Metric.F1_MACRO: {TaskKind.BINARY, TaskKind.MULTICLASS},
    Metric.R_SQUARED: {TaskKind.REGRESSION},
}

DEFAULT_METRIC = {
    TaskKind.BINARY: Metric.ACCURACY,
    TaskKind.MULTICLASS: Metric.F1_MACRO,
    TaskKind.REGRESSION: Metric.R_SQUARED,
}


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    target_column: str
    metric: Metric

    def __post_init__(self):
        if self.kind not in _METRIC_KINDS[self.metric]:
            raise ValueError(
                f"metric {self.metric.value} incompatible with task {self.kind.value}"
            )

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskSpec":
        kind = TaskKind(doc["kind"])
        metric = Metric(doc["metric"]) if "metric" in doc else DEFAULT_METRIC[kind]
        return cls(kind=kind, target_column=doc["target"], metric=metric)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": self.target_column,
            "metric": self.metric.value,
        }


@dataclass(frozen=True)
class MetaFeatures:
    """Fixed 16-entry dataset summary; see META_FEATURE_NAMES for the layout."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != META_LEN:
            raise ValueError(f"meta vector must have {META_LEN} entries")
        for i, v in enumerate(self.values):
            if not math.isfinite(v):
                raise ValueError(f"meta feature {META_FEATURE_NAMES[i]} is not finite")
        for i in _RATIO_SLOTS:
            if not 0.0 <= self.values[i] <= 1.0:
                raise ValueError(
                    f"meta feature {META_FEATURE_NAMES[i]} outside [0,1]"
                )

    @classmethod
    def zeros(cls) -> "MetaFeatures":
        return cls(values=(0.0,) * META_LEN)


@dataclass(frozen=True)
class GameRules:
    """Catalog plus the two episode bounds; shared by all game operations."""

    catalog: Catalog
    l_max: int = L_MAX_DEFAULT
    m_max: int = M_MAX_DEFAULT

    def __post_init__(self):
        if self.l_max < 1 or self.m_max < 1:
            raise ValueError("l_max and m_max must be positive")

    @property
    def n_primitives(self) -> int:
        return len(self.catalog)

    @property
    def action_count(self) -> int:
        return action_space_size(self.catalog, self.l_max)

    @property
    def state_vector_length(self) -> int:
        return META_LEN + 3 + self.l_max


@dataclass(frozen=True)
class GameState:
    meta: MetaFeatures
    task: TaskSpec
    pipeline: tuple[str, ...]
    move_count: int = 0
    committed: bool = False


def initial_state(meta: MetaFeatures, task: TaskSpec) -> GameState:
    return GameState(meta=meta, task=task, pipeline=(), move_count=0, committed=False)


class ActionKind(str, Enum):
    INSERT = "insert"
    DELETE = "delete"
    REPLACE = "replace"
    COMMIT = "commit"


@dataclass(frozen=True)
class EditAction:
    kind: ActionKind
    position: int = -1
    primitive_id: str = ""

    @classmethod
    def insert(cls, position: int, primitive_id: str) -> "EditAction":
        return cls(ActionKind.INSERT, position, primitive_id)

    @classmethod
    def delete(cls, position: int) -> "EditAction":
        return cls(ActionKind.DELETE, position)

    @classmethod
    def replace(cls, position: int, primitive_id: str) -> "EditAction":
        return cls(ActionKind.REPLACE, position, primitive_id)

    @classmethod
    def commit(cls) -> "EditAction":
        return cls(ActionKind.COMMIT)

    def describe(self) -> str:
        if self.kind is ActionKind.INSERT:
            return f"insert {self.primitive_id} at {self.position}"
        if self.kind is ActionKind.DELETE:
            return f"delete at {self.position}"
        if self.kind is ActionKind.REPLACE:
            return f"replace at {self.position} with {self.primitive_id}"
        return "commit"


def action_space_size(catalog: Catalog, l_max: int = L_MAX_DEFAULT) -> int:
    """Fixed global action count: l_max*n inserts + l_max deletes + l_max*n replaces + commit."""
    n = len(catalog)
    return 2 * l_max * n + l_max + 1


def encode_action(action: EditAction, catalog: Catalog, l_max: int = L_MAX_DEFAULT) -> int:
    """Map an EditAction to its unique index < action_space_size."""
    n = len(catalog)
    if action.kind is ActionKind.INSERT:
        _check_slot(action.position, l_max)
        return action.position * n + catalog.ordinal(action.primitive_id)
    if action.kind is ActionKind.DELETE:
        _check_slot(action.position, l_max)
        return l_max * n + action.position
    if action.kind is ActionKind.REPLACE:
        _check_slot(action.position, l_max)
        return l_max * n + l_max + action.position * n + catalog.ordinal(action.primitive_id)
    return 2 * l_max * n + l_max


def decode_action(index: int, catalog: Catalog, l_max: int = L_MAX_DEFAULT) -> EditAction:
    """Inverse of encode_action."""
    n = len(catalog)
    total = action_space_size(catalog, l_max)
    if not 0 <= index < total:
        raise ValueError(f"action index {index} outside [0, {total})")
    if index < l_max * n:
        pos, ordinal = divmod(index, n)
        return EditAction.insert(pos, catalog.by_ordinal(ordinal).id)
    index -= l_max * n
    if index < l_max:
        return EditAction.delete(index)
    index -= l_max
    if index < l_max * n:
        pos, ordinal = divmod(index, n)
        return EditAction.replace(pos, catalog.by_ordinal(ordinal).id)
    return EditAction.commit()


def _check_slot(position: int, l_max: int):
    if not 0 <= position < l_max:
        raise ValueError(f"slot {position} outside [0, {l_max})")


def encode_state(state: GameState, rules: GameRules) -> np.ndarray:
    """Fixed-width numeric encoding: 16 meta ++ 3 task one-hot ++ l_max ordinal slots.

    Empty slots carry the sentinel value n (= catalog size); injective over
    (task kind, pipeline) for fixed meta-features and catalog.
    """
    catalog, l_max = rules.catalog, rules.l_max
    n = len(catalog)
    vec = np.empty(META_LEN + 3 + l_max, dtype=np.float64)
    vec[:META_LEN] = state.meta.values
    vec[META_LEN : META_LEN + 3] = 0.0
    vec[META_LEN + TASK_ONEHOT_ORDER.index(state.task.kind)] = 1.0
    slots = [catalog.ordinal(pid) for pid in state.pipeline]
    slots.extend([n] * (l_max - len(slots)))
    vec[META_LEN + 3 :] = slots
    return vec


def state_key(vec: np.ndarray) -> str:
    """Stable short hash of a state vector (node bookkeeping / diagnostics)."""
    return hashlib.blake2b(np.ascontiguousarray(vec).tobytes(), digest_size=12).hexdigest()


def is_terminal(state: GameState, rules: GameRules) -> bool:
    return state.committed or state.move_count >= rules.m_max


def legal_actions(state: GameState, rules: GameRules) -> np.ndarray:
    """Boolean mask over the full action index space.

    An edit is legal iff the edited pipeline passes the grammar and every
    touched primitive is compatible with the state's task; commit is legal
    iff the pipeline ends with an estimator.  Raises on terminal states.
    """
    if is_terminal(state, rules):
        raise IllegalActionError("legal_actions called on a terminal state")
    catalog, l_max = rules.catalog, rules.l_max
    n = len(catalog)
    mask = np.zeros(rules.action_count, dtype=bool)

    ranks = _catalog_ranks(catalog)
    compat = np.array(
        [state.task.kind in p.task_compat for p in catalog.primitives], dtype=bool
    )
    is_est = ranks == CATEGORY_RANK[Category.ESTIMATE]

    pipe = state.pipeline
    k = len(pipe)
    pranks = [CATEGORY_RANK[catalog.spec(pid).category] for pid in pipe]
    has_est = bool(pranks) and pranks[-1] == CATEGORY_RANK[Category.ESTIMATE]

    if k < l_max:
        for pos in range(k + 1):
            lo = pranks[pos - 1] if pos > 0 else -1
            hi = pranks[pos] if pos < k else 4
            allowed = compat & (ranks >= lo) & (ranks <= hi)
            if pos < k or has_est:
                allowed = allowed & ~is_est
            mask[pos * n : (pos + 1) * n] = allowed

    mask[l_max * n : l_max * n + k] = True

    base = l_max * n + l_max
    for pos in range(k):
        lo = pranks[pos - 1] if pos > 0 else -1
        hi = pranks[pos + 1] if pos < k - 1 else 4
        allowed = compat & (ranks >= lo) & (ranks <= hi)
        est_elsewhere = has_est and pos != k - 1
        if pos != k - 1 or est_elsewhere:
            allowed = allowed & ~is_est
        mask[base + pos * n : base + (pos + 1) * n] = allowed

    mask[-1] = has_est
    return mask


# keyed by id(); the value keeps the catalog alive so ids are never reused
_RANK_CACHE: dict[int, tuple[Catalog, np.ndarray]] = {}


def _catalog_ranks(catalog: Catalog) -> np.ndarray:
    entry = _RANK_CACHE.get(id(catalog))
    if entry is None:
        ranks = np.array(
            [CATEGORY_RANK[p.category] for p in catalog.primitives], dtype=np.int64
        )
        _RANK_CACHE[id(catalog)] = (catalog, ranks)
        return ranks
    return entry[1]


def _illegal_reason(state: GameState, action: EditAction, rules: GameRules) -> str:
    if is_terminal(state, rules):
        return "state is terminal"
    catalog = rules.catalog
    k = len(state.pipeline)
    if action.kind is ActionKind.COMMIT:
        return "commit requires an estimator-terminated pipeline"
    if action.kind is ActionKind.INSERT:
        if k >= rules.l_max:
            return f"pipeline already at l_max={rules.l_max} slots"
        if not 0 <= action.position <= k:
            return f"insert position {action.position} outside [0, {k}]"
    else:
        if not 0 <= action.position < k:
            return f"{action.kind.value} position {action.position} outside [0, {k})"
    if action.kind in (ActionKind.INSERT, ActionKind.REPLACE):
        spec = catalog.spec(action.primitive_id)
        if state.task.kind not in spec.task_compat:
            return (
                f"{spec.id} is not compatible with task {state.task.kind.value}"
            )
    candidate = _edited_pipeline(state.pipeline, action)
    verdict = validate_pipeline(catalog, candidate, rules.l_max)
    if not verdict.ok:
        return "; ".join(verdict.violations)
    return "action rejected"


def _edited_pipeline(pipeline: tuple[str, ...], action: EditAction) -> tuple[str, ...]:
    if action.kind is ActionKind.INSERT:
        return pipeline[: action.position] + (action.primitive_id,) + pipeline[action.position :]
    if action.kind is ActionKind.DELETE:
        return pipeline[: action.position] + pipeline[action.position + 1 :]
    if action.kind is ActionKind.REPLACE:
        return pipeline[: action.position] + (action.primitive_id,) + pipeline[action.position + 1 :]
    return pipeline


def apply_action(
    state: GameState, action: EditAction, rules: GameRules, check: bool = True
) -> GameState:
    """Apply a legal action, returning the successor state (input unchanged)."""
    if check:
        if is_terminal(state, rules):
            raise IllegalActionError("state is terminal")
        idx = encode_action(action, rules.catalog, rules.l_max)
        if not legal_actions(state, rules)[idx]:
            raise IllegalActionError(
                f"illegal {action.describe()}: {_illegal_reason(state, action, rules)}"
            )
    if action.kind is ActionKind.COMMIT:
        return _replace(state, committed=True, move_count=state.move_count + 1)
    return _replace(
        state,
        pipeline=_edited_pipeline(state.pipeline, action),
        move_count=state.move_count + 1,
    )


def replay_trace(
    initial: GameState, actions: Iterable[EditAction], rules: GameRules
) -> GameState:
    """Fold apply_action over a recorded action list; the explainability contract.

    Raises ReplayError carrying the index of the first illegal action.
    """
    state = initial
    for i, action in enumerate(actions):
        try:
            state = apply_action(state, action, rules)
        except IllegalActionError as exc:
            raise ReplayError(i, str(exc))
    return state
