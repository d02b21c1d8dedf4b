"""Neural-guided Monte-Carlo tree search over the edit game.

Selection maximizes U(s,a) = Q(s,a) + c * P(s,a) * sqrt(N(s)) / (1 + N(s,a))
with N(s) = sum_a N(s,a).  Each simulation expands exactly one new leaf with
network priors and value, or backs up the real evaluation at terminal
leaves; the improved policy is pi(a) proportional to N(root,a)^(1/tau).

Trees are keyed by path, not by state hash: edit sequences produce many
transpositions, and merging them would change the N(s) semantics of the
selection rule.  A single search owns its tree; nothing here is shared.

The environment passed in must provide::

    env.rules            -> GameRules
    env.terminal_value(state) -> float in [0,1]   # never raises

Evaluation failures are the environment's concern; they surface as reward 0,
so the search itself never aborts mid-simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import IllegalActionError
from .game import (
    GameRules,
    GameState,
    apply_action,
    decode_action,
    encode_state,
    is_terminal,
    legal_actions,
    state_key,
)
from . import kernels


class SearchEnv(Protocol):
    rules: GameRules

    def terminal_value(self, state: GameState) -> float: ...


class PolicySource(Protocol):
    def predict(self, state_vec: np.ndarray, legal_mask: np.ndarray): ...


@dataclass(frozen=True)
class SearchConfig:
    c: float = 1.0
    simulations: int = 100
    tau_cutoff: int = 4
    root_noise: bool = False
    dirichlet_alpha: float = 0.3
    noise_epsilon: float = 0.25
    rng_seed: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("exploration constant c must be positive")
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if not 0.0 <= self.noise_epsilon < 1.0:
            raise ValueError("noise epsilon must lie in [0,1)")


def puct_score(q: float, p: float, n_s: float, n_sa: float, c: float) -> float:
    """The selection score for one action; exact arithmetic of the update rule."""
    return q + c * p * math.sqrt(n_s) / (1.0 + n_sa)


class SearchNode:
    """Per-state statistics over its legal actions."""

    __slots__ = (
        "state",
        "state_key",
        "legal_idx",
        "p",
        "n",
        "w",
        "children",
        "terminal",
        "terminal_value",
        "net_value",
    )

    def __init__(self, state: GameState):
        self.state = state
        self.state_key: str = ""
        self.legal_idx: np.ndarray | None = None
        self.p: np.ndarray | None = None
        self.n: np.ndarray | None = None
        self.w: np.ndarray | None = None
        self.children: dict[int, SearchNode] = {}
        self.terminal = False
        self.terminal_value = 0.0
        self.net_value = 0.0

    @property
    def visit_count(self) -> float:
        return float(self.n.sum())

    @property
    def q(self) -> np.ndarray:
        out = np.zeros_like(self.w)
        np.divide(self.w, self.n, out=out, where=self.n > 0)
        return out


@dataclass
class SearchResult:
    pi: np.ndarray  # full action space; zero on illegal actions
    value: float
    root: SearchNode


def _expand(node: SearchNode, net: PolicySource, rules: GameRules) -> None:
    vec = encode_state(node.state, rules)
    node.state_key = state_key(vec)
    mask = legal_actions(node.state, rules)
    probs, value = net.predict(vec, mask)
    node.legal_idx = np.flatnonzero(mask)
    p = np.asarray(probs, dtype=np.float64)[node.legal_idx]
    total = p.sum()
    if not math.isfinite(total) or total <= 0.0:
        p = np.full(len(node.legal_idx), 1.0 / len(node.legal_idx))
    else:
        p = p / total
    node.p = p
    node.n = np.zeros(len(node.legal_idx), dtype=np.float64)
    node.w = np.zeros(len(node.legal_idx), dtype=np.float64)
    node.net_value = min(1.0, max(0.0, float(value)))


def backup(path: list[tuple[SearchNode, int]], value: float) -> None:
    """Add one visit of `value` to every (node, action) edge on the path.

    Single-player game: no sign alternation.
    """
    for node, a in path:
        node.n[a] += 1.0
        node.w[a] += value


def _select(node: SearchNode, c: float) -> int:
    return kernels.puct_argmax(node.q, node.p, node.n, node.visit_count, c)


def run_search(
    root: GameState,
    net: PolicySource,
    cfg: SearchConfig,
    env: SearchEnv,
    rng: np.random.Generator | None = None,
    tau: float = 1.0,
) -> SearchResult:
    """Run cfg.simulations simulations from `root` and extract the improved policy.

    The first simulation expands the root itself, so edge visit counts total
    simulations - 1.  Deterministic given the rng (only root Dirichlet noise
    consumes randomness).  tau <= 1e-8 means argmax with lowest-index ties.
    """
    rules = env.rules
    if is_terminal(root, rules):
        raise IllegalActionError("run_search called on a terminal state")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    root_node = SearchNode(root)
    _expand(root_node, net, rules)
    if cfg.root_noise and len(root_node.legal_idx) > 1:
        noise = rng.dirichlet(
            np.full(len(root_node.legal_idx), cfg.dirichlet_alpha)
        )
        root_node.p = (1.0 - cfg.noise_epsilon) * root_node.p + cfg.noise_epsilon * noise

    for _ in range(cfg.simulations - 1):
        node = root_node
        path: list[tuple[SearchNode, int]] = []
        while True:
            a = _select(node, cfg.c)
            path.append((node, a))
            child = node.children.get(a)
            if child is None:
                action = decode_action(
                    int(node.legal_idx[a]), rules.catalog, rules.l_max
                )
                child_state = apply_action(node.state, action, rules, check=False)
                child = SearchNode(child_state)
                node.children[a] = child
                if is_terminal(child_state, rules):
                    child.terminal = True
                    child.terminal_value = float(env.terminal_value(child_state))
                    value = child.terminal_value
                else:
                    _expand(child, net, rules)
                    value = child.net_value
                break
            if child.terminal:
                value = child.terminal_value
                break
            node = child
        backup(path, value)

    pi = np.zeros(rules.action_count, dtype=np.float64)
    counts = root_node.n
    if counts.sum() <= 0.0:
        weights = root_node.p
    elif tau <= 1e-8:
        weights = np.zeros_like(counts)
        weights[int(np.argmax(counts))] = 1.0
    else:
        weights = np.power(counts, 1.0 / tau)
        weights = weights / weights.sum()
    pi[root_node.legal_idx] = weights

    visited = counts.sum()
    if visited > 0:
        value = float((root_node.q * counts).sum() / visited)
    else:
        value = root_node.net_value
    return SearchResult(pi=pi, value=value, root=root_node)
