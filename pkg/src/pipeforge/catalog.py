"""Primitive vocabulary and the pipeline grammar.

A catalog is an ordered list of primitives; ordinals (= document order) are
load-bearing because the state encoding and the action index space are built
on them.  Pipelines are valid when their categories are non-decreasing in the
order clean < transform < select < estimate, carry at most one estimator
(last if present), and fit within ``l_max`` slots.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import CatalogError, UnknownPrimitiveError

L_MAX_DEFAULT = 8


class Category(str, Enum):
    CLEAN = "clean"
    TRANSFORM = "transform"
    SELECT = "select"
    ESTIMATE = "estimate"


class TaskKind(str, Enum):
    BINARY = "binary_classification"
    MULTICLASS = "multiclass_classification"
    REGRESSION = "regression"


CATEGORY_RANK = {
    Category.CLEAN: 0,
    Category.TRANSFORM: 1,
    Category.SELECT: 2,
    Category.ESTIMATE: 3,
}


@dataclass(frozen=True)
class PrimitiveSpec:
    """One pipeline building block with frozen hyper-parameters."""

    id: str
    category: Category
    task_compat: frozenset[TaskKind]
    defaults: Mapping[str, object]

    def compatible(self, kind: TaskKind) -> bool:
        return kind in self.task_compat


@dataclass(frozen=True)
class Catalog:
    """Immutable, ordered primitive vocabulary."""

    primitives: tuple[PrimitiveSpec, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {p.id: i for i, p in enumerate(self.primitives)}
        )

    def __len__(self) -> int:
        return len(self.primitives)

    def __contains__(self, primitive_id: str) -> bool:
        return primitive_id in self._index

    def ordinal(self, primitive_id: str) -> int:
        try:
            return self._index[primitive_id]
        except KeyError:
            raise UnknownPrimitiveError(f"unknown primitive id: {primitive_id!r}")

    def spec(self, primitive_id: str) -> PrimitiveSpec:
        return self.primitives[self.ordinal(primitive_id)]

    def by_ordinal(self, ordinal: int) -> PrimitiveSpec:
        return self.primitives[ordinal]

    def estimators(self) -> tuple[PrimitiveSpec, ...]:
        return tuple(p for p in self.primitives if p.category is Category.ESTIMATE)

    def content_hash(self) -> str:
        """Hex digest of the canonical document; guards checkpoints."""
        doc = [
            {
                "id": p.id,
                "category": p.category.value,
                "tasks": sorted(k.value for k in p.task_compat),
                "defaults": dict(sorted(p.defaults.items())),
            }
            for p in self.primitives
        ]
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _parse_entry(entry: Mapping[str, object], position: int) -> PrimitiveSpec:
    if not isinstance(entry, Mapping):
        raise CatalogError(f"entry {position} is not an object")
    pid = entry.get("id")
    if not isinstance(pid, str) or not pid:
        raise CatalogError(f"entry {position} has a missing or empty id")
    raw_cat = entry.get("category")
    try:
        category = Category(raw_cat)
    except ValueError:
        raise CatalogError(f"unknown category {raw_cat!r} for primitive {pid!r}")
    tasks = entry.get("tasks", [])
    if not isinstance(tasks, Sequence) or isinstance(tasks, str):
        raise CatalogError(f"primitive {pid!r}: tasks must be a list")
    try:
        compat = frozenset(TaskKind(t) for t in tasks)
    except ValueError as exc:
        raise CatalogError(f"primitive {pid!r}: {exc}")
    defaults = entry.get("defaults", {})
    if not isinstance(defaults, Mapping):
        raise CatalogError(f"primitive {pid!r}: defaults must be an object")
    if category is Category.ESTIMATE and not compat:
        raise CatalogError(f"estimator {pid!r} declares no compatible task")
    return PrimitiveSpec(id=pid, category=category, task_compat=compat, defaults=dict(defaults))


def load_catalog(source) -> Catalog:
    """Load a catalog from a JSON file path, a JSON string, or a parsed list.

    Ordinal order equals document order.  Rejects duplicate ids, unknown
    categories, and any declared task kind left without an estimator.
    """
    if isinstance(source, (str, Path)) and not (
        isinstance(source, str) and source.lstrip().startswith("[")
    ):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise CatalogError(f"cannot read catalog file {source}: {exc}")
        document = _parse_json(text)
    elif isinstance(source, str):
        document = _parse_json(source)
    else:
        document = source

    if not isinstance(document, list):
        raise CatalogError("catalog document must be a top-level array")

    primitives = []
    seen: set[str] = set()
    for position, entry in enumerate(document):
        spec = _parse_entry(entry, position)
        if spec.id in seen:
            raise CatalogError(f"duplicate primitive id: {spec.id!r}")
        seen.add(spec.id)
        primitives.append(spec)

    declared = set().union(*(p.task_compat for p in primitives)) if primitives else set()
    covered = set().union(
        *(p.task_compat for p in primitives if p.category is Category.ESTIMATE),
        set(),
    )
    missing = declared - covered
    if missing:
        names = ", ".join(sorted(k.value for k in missing))
        raise CatalogError(f"no estimator for declared task(s): {names}")
    if not any(p.category is Category.ESTIMATE for p in primitives):
        raise CatalogError("catalog contains no estimator primitive")

    return Catalog(primitives=tuple(primitives))


def _parse_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog document is not valid JSON: {exc}")


def default_catalog() -> Catalog:
    """The bundled 10-primitive catalog (3 clean, 3 transform, 2 select, 2 estimate)."""
    with resources.files("pipeforge.data").joinpath("default_catalog.json").open(
        "r", encoding="utf-8"
    ) as fh:
        return load_catalog(json.load(fh))


def extended_catalog() -> Catalog:
    """The 13-primitive catalog for use with an external evaluator."""
    with resources.files("pipeforge.data").joinpath("extended_catalog.json").open(
        "r", encoding="utf-8"
    ) as fh:
        return load_catalog(json.load(fh))


@dataclass(frozen=True)
class Verdict:
    """Outcome of a grammar check: ok, or the list of violated rules."""

    ok: bool
    violations: tuple[str, ...] = ()


def validate_pipeline(
    catalog: Catalog, pipeline: Sequence[str], l_max: int = L_MAX_DEFAULT
) -> Verdict:
    """Check a primitive-id sequence against the grammar.

    Unresolved ids raise :class:`UnknownPrimitiveError`; grammar failures are
    reported in the verdict.  The empty pipeline is valid (a legal
    non-terminal state).
    """
    specs = [catalog.spec(pid) for pid in pipeline]

    violations: list[str] = []
    if len(pipeline) > l_max:
        violations.append(f"pipeline length {len(pipeline)} exceeds l_max={l_max}")

    ranks = [CATEGORY_RANK[s.category] for s in specs]
    for i in range(1, len(ranks)):
        if ranks[i] < ranks[i - 1]:
            violations.append(
                f"category decreases at position {i} "
                f"({specs[i - 1].category.value} -> {specs[i].category.value})"
            )
    estimator_positions = [
        i for i, s in enumerate(specs) if s.category is Category.ESTIMATE
    ]
    if len(estimator_positions) > 1:
        violations.append(f"{len(estimator_positions)} estimators (at most one allowed)")
    if estimator_positions and estimator_positions[0] != len(specs) - 1:
        violations.append(
            f"estimator at position {estimator_positions[0]} is not last"
        )
    return Verdict(ok=not violations, violations=tuple(violations))


def enumerate_valid_pipelines(
    catalog: Catalog,
    task_kind: TaskKind,
    l_max: int,
    committed_only: bool = True,
) -> list[tuple[str, ...]]:
    """All grammar-valid, task-compatible pipelines up to ``l_max`` slots.

    With ``committed_only`` the sequence must end in an estimator (i.e. be
    commitable).  Order is deterministic: by length, then lexicographic in
    ordinals.  Cached per (catalog hash, kind, l_max) since the benchmark's
    random-search column samples from this set.
    """
    key = (catalog.content_hash(), task_kind, l_max, committed_only)
    cached = _ENUM_CACHE.get(key)
    if cached is not None:
        return cached

    usable = [
        p for p in catalog.primitives if p.compatible(task_kind)
    ]
    non_est = [p for p in usable if p.category is not Category.ESTIMATE]
    ests = [p for p in usable if p.category is Category.ESTIMATE]

    prefixes: list[list[PrimitiveSpec]] = [[]]
    frontier: list[list[PrimitiveSpec]] = [[]]
    for _ in range(l_max):
        nxt: list[list[PrimitiveSpec]] = []
        for prefix in frontier:
            floor = CATEGORY_RANK[prefix[-1].category] if prefix else 0
            for p in non_est:
                if CATEGORY_RANK[p.category] >= floor:
                    nxt.append(prefix + [p])
        prefixes.extend(nxt)
        frontier = nxt

    out: list[tuple[str, ...]] = []
    if not committed_only:
        out.extend(tuple(s.id for s in prefix) for prefix in prefixes)
    for prefix in prefixes:
        if len(prefix) >= l_max:
            continue
        for est in ests:
            out.append(tuple(s.id for s in prefix) + (est.id,))
    out.sort(key=lambda ids: (len(ids), tuple(catalog.ordinal(i) for i in ids)))
    _ENUM_CACHE[key] = out
    return out


_ENUM_CACHE: dict[tuple, list[tuple[str, ...]]] = {}
