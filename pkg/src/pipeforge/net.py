"""Policy/value sequence network with hand-written analytic gradients.

Architecture: the pipeline slots are embedded and run through a single GRU
layer whose initial hidden state is a tanh projection of the 19 meta/task
entries; a linear policy head feeds a masked softmax over the edit-action
space and a sigmoid value head predicts the final evaluation in [0,1].

The objective per batch is

    mean_b[ -sum_a pi_b(a) log p_theta(a|s_b)  +  (v_theta(s_b) - e_b)^2 ]
    + alpha * ||theta||^2  +  beta * mean_b ||legal logits_b||_1

All gradients are derived by hand and checked against central finite
differences in the test suite; keep both sides independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .catalog import Catalog
from .errors import CheckpointError, TrainingNumericsError
from .game import META_LEN, GameRules, action_space_size

CTX_LEN = META_LEN + 3

EMBED_DIM_DEFAULT = 16
HIDDEN_DIM_DEFAULT = 64
ALPHA_DEFAULT = 1e-4
BETA_DEFAULT = 1e-4
LEARNING_RATE_DEFAULT = 0.01
PROB_CLAMP = 1e-12
INIT_SCALE = 0.05

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetDims:
    n: int
    l_max: int
    a: int
    d: int
    h: int

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        n, d, h, a = self.n, self.d, self.h, self.a
        gate = {"w": (h, d), "u": (h, h), "b": (h,)}
        shapes: dict[str, tuple[int, ...]] = {
            "embed": (n + 1, d),
            "w_ctx": (h, CTX_LEN),
            "b_ctx": (h,),
        }
        for g in ("z", "r", "h"):
            shapes[f"w_{g}"] = gate["w"]
            shapes[f"u_{g}"] = gate["u"]
            shapes[f"b_{g}"] = gate["b"]
        shapes["w_pol"] = (a, h)
        shapes["b_pol"] = (a,)
        shapes["w_val"] = (h,)
        shapes["b_val"] = ()
        return shapes


PARAM_GROUPS = (
    "embed",
    "w_ctx",
    "b_ctx",
    "w_z",
    "u_z",
    "b_z",
    "w_r",
    "u_r",
    "b_r",
    "w_h",
    "u_h",
    "b_h",
    "w_pol",
    "b_pol",
    "w_val",
    "b_val",
)


@dataclass
class NetParams:
    dims: NetDims
    catalog_hash: str
    tensors: dict[str, np.ndarray]
    alpha: float = ALPHA_DEFAULT
    beta: float = BETA_DEFAULT
    learning_rate: float = LEARNING_RATE_DEFAULT

    def copy(self) -> "NetParams":
        return NetParams(
            dims=self.dims,
            catalog_hash=self.catalog_hash,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            alpha=self.alpha,
            beta=self.beta,
            learning_rate=self.learning_rate,
        )


def init_params(
    rules: GameRules,
    d: int = EMBED_DIM_DEFAULT,
    h: int = HIDDEN_DIM_DEFAULT,
    seed: int = 0,
    alpha: float = ALPHA_DEFAULT,
    beta: float = BETA_DEFAULT,
    learning_rate: float = LEARNING_RATE_DEFAULT,
) -> NetParams:
    """Fresh parameters, uniform in [-0.05, 0.05] from the run seed."""
    dims = NetDims(
        n=rules.n_primitives, l_max=rules.l_max, a=rules.action_count, d=d, h=h
    )
    rng = np.random.default_rng(seed)
    tensors = {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        for name, shape in dims.tensor_shapes().items()
    }
    return NetParams(
        dims=dims,
        catalog_hash=rules.catalog.content_hash(),
        tensors=tensors,
        alpha=alpha,
        beta=beta,
        learning_rate=learning_rate,
    )


@dataclass(frozen=True)
class PolicyValueOutput:
    probs: np.ndarray  # length A, exactly 0 on illegal actions
    value: float


@dataclass(frozen=True)
class TrainingExample:
    """(state, search policy, final evaluation) self-play tuple."""

    state_vec: np.ndarray
    legal_idx: np.ndarray  # sorted action indices that were legal
    pi_target: np.ndarray  # distribution over legal_idx
    evaluation: float

    def __post_init__(self):
        if len(self.legal_idx) != len(self.pi_target):
            raise ValueError("pi_target must align with legal_idx")
        if len(self.legal_idx) == 0:
            raise ValueError("training example with no legal action")
        total = float(np.sum(self.pi_target))
        if not math.isclose(total, 1.0, abs_tol=1e-6):
            raise ValueError(f"pi_target sums to {total}, expected 1")
        if not 0.0 <= self.evaluation <= 1.0:
            raise ValueError(f"evaluation {self.evaluation} outside [0,1]")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def masked_softmax(logits: np.ndarray, legal: np.ndarray) -> np.ndarray:
    """Softmax restricted to legal entries; exact zeros elsewhere."""
    out = np.zeros_like(logits)
    shifted = logits - np.max(logits, axis=-1, where=legal, initial=-np.inf, keepdims=True)
    np.exp(shifted, out=out, where=legal)
    out /= out.sum(axis=-1, keepdims=True)
    return out


def _assemble(batch: Sequence[TrainingExample], dims: NetDims):
    b = len(batch)
    svecs = np.stack([ex.state_vec for ex in batch]).astype(np.float64)
    legal = np.zeros((b, dims.a), dtype=bool)
    target = np.zeros((b, dims.a), dtype=np.float64)
    evals = np.empty(b, dtype=np.float64)
    for i, ex in enumerate(batch):
        legal[i, ex.legal_idx] = True
        target[i, ex.legal_idx] = ex.pi_target
        evals[i] = ex.evaluation
    return svecs, legal, target, evals


def _forward_batch(params: NetParams, state_vecs: np.ndarray, legal: np.ndarray):
    """Batched forward pass; returns (probs, value, cache for backprop)."""
    t_ = params.tensors
    dims = params.dims
    ctx = state_vecs[:, :CTX_LEN]
    slots = state_vecs[:, CTX_LEN:].astype(np.int64)

    x_seq = t_["embed"][slots]  # (B, L, d)
    h0 = np.tanh(ctx @ t_["w_ctx"].T + t_["b_ctx"])
    hs = [h0]
    zs, rs, hbs = [], [], []
    h = h0
    for t in range(dims.l_max):
        x = x_seq[:, t]
        z = _sigmoid(x @ t_["w_z"].T + h @ t_["u_z"].T + t_["b_z"])
        r = _sigmoid(x @ t_["w_r"].T + h @ t_["u_r"].T + t_["b_r"])
        hb = np.tanh(x @ t_["w_h"].T + (r * h) @ t_["u_h"].T + t_["b_h"])
        h = (1.0 - z) * h + z * hb
        zs.append(z)
        rs.append(r)
        hbs.append(hb)
        hs.append(h)

    logits = h @ t_["w_pol"].T + t_["b_pol"]
    v_raw = h @ t_["w_val"] + t_["b_val"]
    value = _sigmoid(v_raw)
    probs = masked_softmax(logits, legal)
    cache = {
        "ctx": ctx,
        "slots": slots,
        "x_seq": x_seq,
        "hs": hs,
        "zs": zs,
        "rs": rs,
        "hbs": hbs,
        "logits": logits,
        "value": value,
        "probs": probs,
        "legal": legal,
    }
    return probs, value, cache


def forward(
    params: NetParams, state_vec: np.ndarray, legal_mask: np.ndarray
) -> PolicyValueOutput:
    """Single-state forward pass (canonical numpy semantics)."""
    legal = np.asarray(legal_mask, dtype=bool)
    if legal.shape != (params.dims.a,):
        raise ValueError(f"legal mask shape {legal.shape} != ({params.dims.a},)")
    if not legal.any():
        raise ValueError("legal mask has no true entry")
    vec = np.asarray(state_vec, dtype=np.float64)
    if vec.shape != (CTX_LEN + params.dims.l_max,):
        raise ValueError(
            f"state vector shape {vec.shape} != ({CTX_LEN + params.dims.l_max},)"
        )
    probs, value, _ = _forward_batch(params, vec[None, :], legal[None, :])
    return PolicyValueOutput(probs=probs[0], value=float(value[0]))


def _loss_terms(params: NetParams, batch: Sequence[TrainingExample]):
    svecs, legal, target, evals = _assemble(batch, params.dims)
    probs, value, cache = _forward_batch(params, svecs, legal)
    logp = np.log(np.maximum(probs, PROB_CLAMP))
    ce = -np.sum(target * logp, axis=1)
    vterm = (value - evals) ** 2
    l2 = params.alpha * sum(float(np.sum(t * t)) for t in params.tensors.values())
    l1 = params.beta * float(
        np.mean(np.sum(np.abs(cache["logits"]), axis=1, where=legal))
    )
    terms = {
        "policy cross-entropy": float(np.mean(ce)),
        "value": float(np.mean(vterm)),
        "l2": l2,
        "l1": l1,
    }
    for name, val in terms.items():
        if not math.isfinite(val):
            raise TrainingNumericsError(name)
    return terms, cache, target, evals


def loss(params: NetParams, batch: Sequence[TrainingExample]) -> float:
    """Mean objective over a non-empty batch (see module docstring)."""
    if not batch:
        raise ValueError("empty batch")
    terms, _, _, _ = _loss_terms(params, batch)
    return sum(terms.values())


def loss_components(params: NetParams, batch: Sequence[TrainingExample]) -> dict:
    terms, _, _, _ = _loss_terms(params, batch)
    return terms


def gradient(
    params: NetParams, batch: Sequence[TrainingExample]
) -> dict[str, np.ndarray]:
    """Analytic gradient of the batch objective, keyed like params.tensors."""
    if not batch:
        raise ValueError("empty batch")
    t_ = params.tensors
    dims = params.dims
    _, cache, target, evals = _loss_terms(params, batch)
    b = len(batch)
    legal = cache["legal"]
    probs, value = cache["probs"], cache["value"]

    grads = {name: np.zeros_like(t) for name, t in t_.items()}

    # policy head: masked softmax + cross-entropy -> (p - t); L1 logit term
    dlogits = np.where(legal, probs - target, 0.0) / b
    dlogits += params.beta * np.where(legal, np.sign(cache["logits"]), 0.0) / b
    # value head through the sigmoid
    dv_raw = 2.0 * (value - evals) * value * (1.0 - value) / b

    h_last = cache["hs"][-1]
    grads["w_pol"] = dlogits.T @ h_last
    grads["b_pol"] = dlogits.sum(axis=0)
    grads["w_val"] = dv_raw @ h_last
    grads["b_val"] = np.asarray(dv_raw.sum())
    dh = dlogits @ t_["w_pol"] + dv_raw[:, None] * t_["w_val"][None, :]

    dx_seq = np.zeros_like(cache["x_seq"])
    for t in range(dims.l_max - 1, -1, -1):
        z, r, hb = cache["zs"][t], cache["rs"][t], cache["hbs"][t]
        h_prev = cache["hs"][t]
        x = cache["x_seq"][:, t]

        dz_pre = dh * (hb - h_prev) * z * (1.0 - z)
        dhb_pre = dh * z * (1.0 - hb * hb)
        dh_prev = dh * (1.0 - z)

        grads["w_h"] += dhb_pre.T @ x
        grads["u_h"] += dhb_pre.T @ (r * h_prev)
        grads["b_h"] += dhb_pre.sum(axis=0)
        d_rh = dhb_pre @ t_["u_h"]
        dr_pre = d_rh * h_prev * r * (1.0 - r)
        dh_prev += d_rh * r

        grads["w_r"] += dr_pre.T @ x
        grads["u_r"] += dr_pre.T @ h_prev
        grads["b_r"] += dr_pre.sum(axis=0)
        dh_prev += dr_pre @ t_["u_r"]

        grads["w_z"] += dz_pre.T @ x
        grads["u_z"] += dz_pre.T @ h_prev
        grads["b_z"] += dz_pre.sum(axis=0)
        dh_prev += dz_pre @ t_["u_z"]

        dx_seq[:, t] = dz_pre @ t_["w_z"] + dr_pre @ t_["w_r"] + dhb_pre @ t_["w_h"]
        dh = dh_prev

    # context projection through tanh
    dctx_pre = dh * (1.0 - cache["hs"][0] ** 2)
    grads["w_ctx"] = dctx_pre.T @ cache["ctx"]
    grads["b_ctx"] = dctx_pre.sum(axis=0)

    flat_slots = cache["slots"].reshape(-1)
    flat_dx = dx_seq.reshape(-1, dims.d)
    np.add.at(grads["embed"], flat_slots, flat_dx)

    for name in grads:
        grads[name] += 2.0 * params.alpha * t_[name]
    return grads


def train_step(
    params: NetParams, batch: Sequence[TrainingExample], learning_rate: float | None = None
) -> tuple[NetParams, float]:
    """One SGD step theta <- theta - eta * grad; returns (new params, pre-step loss)."""
    eta = params.learning_rate if learning_rate is None else learning_rate
    pre = loss(params, batch)
    grads = gradient(params, batch)
    new_tensors = {
        name: params.tensors[name] - eta * grads[name] for name in params.tensors
    }
    out = NetParams(
        dims=params.dims,
        catalog_hash=params.catalog_hash,
        tensors=new_tensors,
        alpha=params.alpha,
        beta=params.beta,
        learning_rate=params.learning_rate,
    )
    return out, pre


def save_checkpoint(params: NetParams, path) -> None:
    """Write the JSON checkpoint; decimal encoding round-trips bit-exactly."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "catalog_hash": params.catalog_hash,
        "dims": {
            "n": params.dims.n,
            "L_max": params.dims.l_max,
            "A": params.dims.a,
            "d": params.dims.d,
            "h": params.dims.h,
        },
        "hyper": {
            "alpha": params.alpha,
            "beta": params.beta,
            "learning_rate": params.learning_rate,
        },
        "params": {
            name: {"shape": list(t.shape), "data": t.reshape(-1).tolist()}
            for name, t in params.tensors.items()
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path, catalog: Catalog) -> NetParams:
    """Read a checkpoint and guard version, catalog hash, and shapes."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('version')} != {CHECKPOINT_VERSION}"
        )
    if doc.get("catalog_hash") != catalog.content_hash():
        raise CheckpointError("checkpoint was trained against a different catalog")
    try:
        dd = doc["dims"]
        dims = NetDims(n=dd["n"], l_max=dd["L_max"], a=dd["A"], d=dd["d"], h=dd["h"])
        hyper = doc.get("hyper", {})
        tensors = {}
        for name, shape in dims.tensor_shapes().items():
            entry = doc["params"][name]
            arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            if tuple(arr.shape) != shape:
                raise CheckpointError(
                    f"tensor {name} has shape {arr.shape}, expected {shape}"
                )
            tensors[name] = arr
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}")
    if dims.n != len(catalog):
        raise CheckpointError(
            f"checkpoint built for {dims.n} primitives, catalog has {len(catalog)}"
        )
    if not all(np.isfinite(t).all() for t in tensors.values()):
        raise CheckpointError("checkpoint contains non-finite parameters")
    return NetParams(
        dims=dims,
        catalog_hash=doc["catalog_hash"],
        tensors=tensors,
        alpha=float(hyper.get("alpha", ALPHA_DEFAULT)),
        beta=float(hyper.get("beta", BETA_DEFAULT)),
        learning_rate=float(hyper.get("learning_rate", LEARNING_RATE_DEFAULT)),
    )


class PolicyValueNet:
    """Parameters plus the fast single-state predict the tree search calls.

    predict() dispatches to the compiled kernel when available; training and
    the spec-level forward() always use the canonical numpy path.
    """

    def __init__(self, params: NetParams):
        self.params = params
        self._packed = None

    def _pack(self):
        if self._packed is None:
            t = self.params.tensors
            self._packed = tuple(
                np.ascontiguousarray(t[name], dtype=np.float64) for name in PARAM_GROUPS
            )
        return self._packed

    def predict(self, state_vec: np.ndarray, legal_mask: np.ndarray):
        from . import kernels

        slots = np.ascontiguousarray(state_vec[CTX_LEN:], dtype=np.int64)
        ctx = np.ascontiguousarray(state_vec[:CTX_LEN], dtype=np.float64)
        legal_u8 = np.ascontiguousarray(legal_mask, dtype=np.uint8)
        probs, value = kernels.forward_single(slots, ctx, legal_u8, *self._pack())
        return probs, value
