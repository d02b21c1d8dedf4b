"""Shared test apparatus: independent oracles and tiny fixtures.

Everything here re-states contracts from scratch on purpose — these are the
brute-force/second-implementation sides of dual-route checks, so they must
not call into the code paths they verify (beyond trivial value types).
"""

from __future__ import annotations

import math

import numpy as np

from pipeforge.catalog import Catalog, TaskKind, load_catalog
from pipeforge.game import GameRules, GameState, Metric, TaskSpec

CATEGORY_ORDER = {"clean": 0, "transform": 1, "select": 2, "estimate": 3}


def grammar_valid(categories: list[str], l_max: int) -> bool:
    """Independent grammar re-statement over category names."""
    if len(categories) > l_max:
        return False
    ranks = [CATEGORY_ORDER[c] for c in categories]
    if any(b < a for a, b in zip(ranks, ranks[1:])):
        return False
    est = [i for i, r in enumerate(ranks) if r == 3]
    if len(est) > 1:
        return False
    if est and est[0] != len(ranks) - 1:
        return False
    return True


def brute_force_legal_mask(state: GameState, rules: GameRules) -> np.ndarray:
    """Legality by enumeration: decode every index, edit by hand, re-check.

    Independent of pipeforge.game.legal_actions: applies its own edit
    semantics and grammar check.
    """
    cat = rules.catalog
    n = len(cat)
    l_max = rules.l_max
    total = 2 * l_max * n + l_max + 1
    ids = list(state.pipeline)
    cats = {p.id: p.category.value for p in cat.primitives}
    compat = {p.id: state.task.kind in p.task_compat for p in cat.primitives}
    k = len(ids)

    mask = np.zeros(total, dtype=bool)
    for idx in range(total):
        if idx < l_max * n:
            pos, ordn = divmod(idx, n)
            pid = cat.primitives[ordn].id
            if pos > k or not compat[pid]:
                continue
            edited = ids[:pos] + [pid] + ids[pos:]
        elif idx < l_max * n + l_max:
            pos = idx - l_max * n
            if pos >= k:
                continue
            edited = ids[:pos] + ids[pos + 1 :]
        elif idx < 2 * l_max * n + l_max:
            rel = idx - l_max * n - l_max
            pos, ordn = divmod(rel, n)
            pid = cat.primitives[ordn].id
            if pos >= k or not compat[pid]:
                continue
            edited = ids[:pos] + [pid] + ids[pos + 1 :]
        else:
            mask[idx] = k > 0 and cats[ids[-1]] == "estimate"
            continue
        mask[idx] = grammar_valid([cats[p] for p in edited], l_max)
    return mask


def binary_task(target: str = "y") -> TaskSpec:
    return TaskSpec(kind=TaskKind.BINARY, target_column=target, metric=Metric.ACCURACY)


def multiclass_task(target: str = "y") -> TaskSpec:
    return TaskSpec(
        kind=TaskKind.MULTICLASS, target_column=target, metric=Metric.F1_MACRO
    )


def regression_task(target: str = "y") -> TaskSpec:
    return TaskSpec(
        kind=TaskKind.REGRESSION, target_column=target, metric=Metric.R_SQUARED
    )


def tiny_catalog() -> Catalog:
    """One estimator, nothing else: the forced-line game."""
    return load_catalog(
        [
            {
                "id": "solo-est",
                "category": "estimate",
                "tasks": ["binary_classification"],
                "defaults": {},
            }
        ]
    )


def entropy_bits(counts: list[int]) -> float:
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


# ---------------------------------------------------------------------------
# search test apparatus
# ---------------------------------------------------------------------------


class UniformNet:
    """Policy source with uniform priors and a flat value of 0.5."""

    def predict(self, state_vec, legal_mask):
        m = np.asarray(legal_mask, dtype=np.float64)
        return m / m.sum(), 0.5


class TableEnv:
    """Synthetic environment scoring committed pipelines from a fixed table."""

    def __init__(self, rules, table, uncommitted_value=0.0, committed_gate=True):
        self.rules = rules
        self.table = dict(table)
        self.uncommitted_value = uncommitted_value
        self.committed_gate = committed_gate

    def terminal_value(self, state):
        if self.committed_gate and not state.committed:
            return self.uncommitted_value
        return self.table.get(tuple(state.pipeline), 0.0)


def spaced_reward_table(rules, task_kind, seed):
    """Deterministic table: a seeded shuffle of evenly spaced rewards."""
    from pipeforge.catalog import enumerate_valid_pipelines

    pipes = enumerate_valid_pipelines(rules.catalog, task_kind, rules.l_max)
    vals = np.linspace(0.1, 0.9, len(pipes))
    np.random.default_rng(seed).shuffle(vals)
    return dict(zip(pipes, vals))


def graded_reward_table(rules):
    """Fixed graded table over the L_max=2 committed pipelines.

    Additive quality scores with a clear global optimum ("sgd-linear",) at
    0.9 (runner-up 0.69); the optimum's commit edge sits two plies from the
    empty state, inside a 500-simulation search horizon.
    """
    from pipeforge.catalog import TaskKind, enumerate_valid_pipelines

    quality = {
        "mean-imputer": 0.04,
        "median-imputer": 0.02,
        "constant-imputer": -0.05,
        "standard-scaler": 0.07,
        "minmax-scaler": 0.05,
        "identity-transform": 0.0,
        "variance-threshold": 0.03,
        "top-k-target-correlation": 0.06,
    }
    base = {"sgd-linear": 0.62, "gaussian-nb": 0.45}
    table = {
        pipe: float(min(0.95, max(0.05, base[pipe[-1]] + sum(quality[x] for x in pipe[:-1]))))
        for pipe in enumerate_valid_pipelines(rules.catalog, TaskKind.BINARY, rules.l_max)
    }
    table[("sgd-linear",)] = 0.9
    return table


def committed_visit_ranking(root):
    """Pipelines ordered by total visits of their commit edges in a search tree."""
    agg: dict[tuple, float] = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node.n is None:
            continue
        for a, child in node.children.items():
            if child.terminal and child.state.committed:
                key = tuple(child.state.pipeline)
                agg[key] = agg.get(key, 0.0) + float(node.n[a])
            elif not child.terminal:
                stack.append(child)
    return sorted(agg.items(), key=lambda kv: -kv[1])


def two_arm_visit_oracle(rewards, sims, c=1.0, priors=(0.5, 0.5)):
    """Exact enumeration of PUCT selection on a two-arm terminal bandit."""
    n = [0.0, 0.0]
    w = [0.0, 0.0]
    for _ in range(sims - 1):
        ns = n[0] + n[1]
        u = [
            (w[i] / n[i] if n[i] else 0.0)
            + c * priors[i] * math.sqrt(ns) / (1.0 + n[i])
            for i in (0, 1)
        ]
        a = 0 if u[0] >= u[1] else 1
        n[a] += 1.0
        w[a] += rewards[a]
    return n


# ---------------------------------------------------------------------------
# scalar (lists + math) re-implementation of the network objective
# ---------------------------------------------------------------------------


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def scalar_net_loss(params, batch) -> float:
    """Independent plain-Python computation of pipeforge.net.loss."""
    t = {k: v.tolist() for k, v in params.tensors.items()}
    dims = params.dims
    l_max, hdim = dims.l_max, dims.h

    data_sum = 0.0
    l1_sum = 0.0
    for ex in batch:
        sv = list(map(float, ex.state_vec))
        ctx, slots = sv[:19], [int(s) for s in sv[19:]]
        h = [math.tanh(_dot(t["w_ctx"][i], ctx) + t["b_ctx"][i]) for i in range(hdim)]
        for step in range(l_max):
            x = t["embed"][slots[step]]
            z = [
                _sig(_dot(t["w_z"][i], x) + _dot(t["u_z"][i], h) + t["b_z"][i])
                for i in range(hdim)
            ]
            r = [
                _sig(_dot(t["w_r"][i], x) + _dot(t["u_r"][i], h) + t["b_r"][i])
                for i in range(hdim)
            ]
            rh = [r[i] * h[i] for i in range(hdim)]
            hb = [
                math.tanh(_dot(t["w_h"][i], x) + _dot(t["u_h"][i], rh) + t["b_h"][i])
                for i in range(hdim)
            ]
            h = [(1.0 - z[i]) * h[i] + z[i] * hb[i] for i in range(hdim)]

        legal = [int(i) for i in ex.legal_idx]
        logits = {a: _dot(t["w_pol"][a], h) + t["b_pol"][a] for a in legal}
        mx = max(logits.values())
        exps = {a: math.exp(v - mx) for a, v in logits.items()}
        total = sum(exps.values())
        ce = 0.0
        for a, pi in zip(legal, ex.pi_target):
            prob = exps[a] / total
            ce -= float(pi) * math.log(max(prob, 1e-12))
        v_raw = _dot(t["w_val"], h) + float(params.tensors["b_val"])
        v = _sig(v_raw)
        data_sum += ce + (v - ex.evaluation) ** 2
        l1_sum += sum(abs(logits[a]) for a in legal)

    l2 = sum(sum(x * x for x in np.asarray(v).reshape(-1)) for v in params.tensors.values())
    return (
        data_sum / len(batch)
        + params.alpha * l2
        + params.beta * l1_sum / len(batch)
    )


def finite_difference_grad(params, batch, name, eps=1e-4):
    """Central finite differences of the loss for one tensor group."""
    from pipeforge.net import loss

    base = params.tensors[name]
    out = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp = loss(params, batch)
        flat[i] = orig - eps
        lm = loss(params, batch)
        flat[i] = orig
        gflat[i] = (lp - lm) / (2.0 * eps)
    return out


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a-f| / max(|a|,|f|) over entries with non-negligible magnitude."""
    a = np.asarray(analytic).reshape(-1)
    f = np.asarray(numeric).reshape(-1)
    scale = np.maximum(np.abs(a), np.abs(f))
    rel = np.zeros_like(scale)
    big = scale > 1e-8
    rel[big] = np.abs(a[big] - f[big]) / scale[big]
    small_bad = (~big) & (np.abs(a - f) > 1e-8)
    if small_bad.any():
        return float("inf")
    return float(rel.max()) if rel.size else 0.0
