"""Conditional prompt generation and few-shot prompt tuning.

A frozen encoder yields node embeddings ``h_v``. Each node gets a condition
vector (by default the similarity-weighted mean of its ``delta``-hop ego
network), a condition-net maps it to a prompt ``p_v`` and the prompted
embedding is ``p_v * h_v``. Tuning fits only the prompt parameters against a
prototype loss on the support set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .encoder import GcnEncoder, encode
from .errors import DataError, FreezeViolationError, NumericalError, ShapeError
from .graph import EgoNetwork, FewShotTask, Graph, GraphCollection, ego_network
from .numerics import (
    DEFAULT_SEED,
    Adam,
    AdamConfig,
    Mlp,
    Param,
    cosine_matrix,
    load_checkpoint,
    mlp_backward,
    mlp_forward,
    paired_cosine,
    save_checkpoint,
)

CONDITIONS = ("weighted", "mean", "node")


# ---------------------------------------------------------------------------
# readout, prompt generation, prompt application


def subgraph_readout(emb, ego: EgoNetwork, v: int, weighted: bool = True) -> np.ndarray:
    """Mean of ``h_u * cos(h_u, h_v)`` over the ego-network members (the center included)."""
    if ego.center != v:
        raise DataError(f"ego-network is centered at {ego.center}, not {v}")
    emb = np.asarray(emb, dtype=np.float64)
    members = np.asarray(ego.members)
    h = emb[members]
    if not weighted:
        return h.mean(axis=0)
    cos, _ = paired_cosine(h, np.repeat(emb[v][None, :], len(members), axis=0))
    return (h * cos[:, None]).mean(axis=0)


def readout_matrix(emb, egos: Sequence[EgoNetwork], weighted: bool = True) -> np.ndarray:
    """Row ``i`` is the readout of ``egos[i]`` around its center."""
    emb = np.asarray(emb, dtype=np.float64)
    centers = np.concatenate([[e.center] * len(e.members) for e in egos]).astype(np.int64)
    members = np.concatenate([e.members for e in egos]).astype(np.int64)
    owner = np.repeat(np.arange(len(egos)), [len(e.members) for e in egos])
    sizes = np.array([len(e.members) for e in egos], dtype=np.float64)
    if weighted:
        w, _ = paired_cosine(emb[members], emb[centers])
    else:
        w = np.ones(len(members))
    op = sp.csr_matrix((w / sizes[owner], (owner, members)), shape=(len(egos), emb.shape[0]))
    return np.asarray(op @ emb)


@dataclass(eq=False)
class ConditionNet:
    """Bottleneck MLP ``d -> m -> d`` producing one prompt per condition vector.

    Both layers use the logistic sigmoid, so prompts are soft gates in (0, 1).
    """

    mlp: Mlp
    task_id: str = ""

    def __post_init__(self):
        d, m = self.mlp.d_in, self.mlp.hidden
        if self.mlp.d_out != d:
            raise ShapeError("condition-net output must match the embedding dimension")
        if not (m < d or m <= 64):
            raise ShapeError(f"hidden width {m} is not a bottleneck for d={d}")

    @classmethod
    def create(cls, d: int, hidden: int = 64, seed: int = DEFAULT_SEED, task_id: str = ""):
        return cls(Mlp.create(d, hidden, d, seed, activation="sigmoid", output_activation="sigmoid"), task_id)

    @property
    def dim(self):
        return self.mlp.d_in

    def params(self) -> list[Param]:
        return self.mlp.params()

    def num_parameters(self, include_bias: bool = True) -> int:
        ps = self.params() if include_bias else [self.mlp.w1, self.mlp.w2]
        return sum(p.size for p in ps)


def generate_prompt(cn: ConditionNet, s) -> np.ndarray:
    """Prompt vector(s) for readout(s) ``s``; 1-D input gives 1-D output."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != cn.dim:
        raise ShapeError(f"readout has dimension {s.shape[-1]}, condition-net expects {cn.dim}")
    out = mlp_forward(cn.mlp, s.reshape(-1, cn.dim))
    return out[0] if s.ndim == 1 else out


def apply_prompt(p, h) -> np.ndarray:
    p, h = np.asarray(p, dtype=np.float64), np.asarray(h, dtype=np.float64)
    if p.shape != h.shape:
        raise ShapeError(f"prompt shape {p.shape} != embedding shape {h.shape}")
    return p * h


def graph_embedding(prompted) -> np.ndarray:
    """Mean of the prompted node embeddings of one graph."""
    prompted = np.asarray(prompted, dtype=np.float64)
    if prompted.ndim != 2 or prompted.shape[0] == 0:
        raise DataError("graph embedding needs at least one node")
    return prompted.mean(axis=0)


# ---------------------------------------------------------------------------
# prototypes and loss


@dataclass(frozen=True)
class Prototypes:
    classes: tuple[int, ...]
    vectors: np.ndarray

    def __post_init__(self):
        if len(self.classes) != len(self.vectors):
            raise DataError("one prototype per class")


def class_prototypes(support: Sequence[tuple[np.ndarray, int]], classes: Sequence[int]) -> Prototypes:
    classes = tuple(int(c) for c in classes)
    vecs = []
    for c in classes:
        members = [np.asarray(v, dtype=np.float64) for v, y in support if y == c]
        if not members:
            raise DataError(f"class {c} has no support embedding")
        vecs.append(np.mean(members, axis=0))
    return Prototypes(classes, np.array(vecs))


def _softmax_ce(cos, y_idx, tau):
    """Cross-entropy over ``cos / tau`` logits and its gradient on ``cos``."""
    logits = cos / tau
    logits = logits - logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    rows = np.arange(len(y_idx))
    loss = float(-logp[rows, y_idx].sum())
    dcos = np.exp(logp)
    dcos[rows, y_idx] -= 1.0
    return loss, dcos / tau


def downstream_loss(query: Sequence[tuple[np.ndarray, int]], protos: Prototypes, tau: float = 0.5) -> float:
    """Prototype cross-entropy of cosine similarities scaled by ``1 / tau``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    index = {c: i for i, c in enumerate(protos.classes)}
    if any(y not in index for _, y in query):
        raise DataError("query class outside the prototype classes")
    z = np.array([np.asarray(v, dtype=np.float64) for v, _ in query])
    cos, _ = cosine_matrix(z, protos.vectors)
    return _softmax_ce(cos, np.array([index[y] for _, y in query]), tau)[0]


def prototype_loss_and_grad(z, y_idx, num_classes: int, tau: float):
    """Loss when prototypes are the class means of ``z`` itself, with gradient on ``z``.

    Gradients flow through both the instance embeddings and the prototypes.
    """
    z = np.asarray(z, dtype=np.float64)
    y_idx = np.asarray(y_idx, dtype=np.int64)
    counts = np.bincount(y_idx, minlength=num_classes).astype(np.float64)
    if np.any(counts == 0):
        raise DataError("every class needs at least one support instance")
    assign = (np.arange(num_classes)[:, None] == y_idx[None, :]) / counts[:, None]
    protos = assign @ z
    cos, backward = cosine_matrix(z, protos)
    loss, dcos = _softmax_ce(cos, y_idx, tau)
    dz, dprotos = backward(dcos)
    return loss, dz + assign.T @ dprotos


def predict(h, protos: Prototypes) -> int:
    """Class of the most cosine-similar prototype; ties go to the earliest (smallest) class."""
    cos, _ = cosine_matrix(np.asarray(h, dtype=np.float64).reshape(1, -1), protos.vectors)
    order = np.argsort(protos.classes, kind="stable")
    best = order[int(np.argmax(cos[0, order]))]
    return protos.classes[best]


def predict_batch(z, protos: Prototypes) -> np.ndarray:
    order = np.argsort(protos.classes, kind="stable")
    cos, _ = cosine_matrix(np.asarray(z, dtype=np.float64), protos.vectors[order])
    return np.asarray(protos.classes)[order][np.argmax(cos, axis=1)]


# ---------------------------------------------------------------------------
# prompt models


class ConditionalPrompt:
    """Per-row prompts from a condition-net applied to fixed condition vectors."""

    def __init__(self, cn: ConditionNet, conditions):
        self.cn = cn
        self.conditions = np.asarray(conditions, dtype=np.float64)

    def params(self) -> list[Param]:
        return self.cn.params()

    def gates(self, rows) -> np.ndarray:
        return mlp_forward(self.cn.mlp, self.conditions[rows])

    def backward(self, rows, dgates):
        mlp_backward(self.cn.mlp, self.conditions[rows], dgates)


class SharedPrompt:
    """One learnable vector applied to every node."""

    def __init__(self, dim: int, init: float = 1.0):
        self.prompt = Param(np.full((1, dim), init), "prompt")

    def params(self) -> list[Param]:
        return [self.prompt]

    def gates(self, rows) -> np.ndarray:
        return np.repeat(self.prompt.value, len(rows), axis=0)

    def backward(self, rows, dgates):
        self.prompt.accumulate(dgates.sum(axis=0, keepdims=True))


class IdentityPrompt:
    """No prompt at all: gates are ones and nothing is trainable."""

    def __init__(self, dim: int):
        self.dim = dim

    def params(self) -> list[Param]:
        return []

    def gates(self, rows) -> np.ndarray:
        return np.ones((len(rows), self.dim))

    def backward(self, rows, dgates):
        pass


# ---------------------------------------------------------------------------
# tuning


@dataclass
class PromptData:
    """Frozen embeddings of every node of a dataset plus per-node conditions.

    ``instance_rows[i]`` lists the embedding rows belonging to instance ``i``:
    a single row for node tasks, a whole graph block for graph tasks.
    """

    embeddings: np.ndarray
    conditions: np.ndarray
    instance_rows: list[np.ndarray]
    instance_kind: str


def prepare_prompt_data(enc: GcnEncoder, data, delta: int = 2, condition: str = "weighted") -> PromptData:
    """Encode ``data`` once and compute condition vectors for every node.

    ``condition`` is ``weighted`` (similarity-weighted ego readout), ``mean``
    (plain ego mean) or ``node`` (the embedding itself).
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if isinstance(data, Graph):
        graphs, kind = [data], "node"
    elif isinstance(data, GraphCollection):
        graphs, kind = list(data.graphs), "graph"
    else:
        raise TypeError("data must be a Graph or GraphCollection")
    blocks, conds = [], []
    for g in graphs:
        h = encode(enc, g)
        blocks.append(h)
        if condition == "node":
            conds.append(h)
        else:
            egos = [ego_network(g, v, delta) for v in range(g.num_nodes)]
            conds.append(readout_matrix(h, egos, weighted=condition == "weighted"))
    emb = np.concatenate(blocks)
    if kind == "node":
        rows = [np.array([v]) for v in range(graphs[0].num_nodes)]
    else:
        starts = np.concatenate([[0], np.cumsum([g.num_nodes for g in graphs])])
        rows = [np.arange(a, b) for a, b in zip(starts[:-1], starts[1:])]
    return PromptData(emb, np.concatenate(conds), rows, kind)


def instance_embeddings(model, prepared: PromptData, instances: Sequence[int]):
    """Prompted embeddings of ``instances`` plus what the backward pass needs.

    Graph instances average the prompted rows of their node block.
    """
    rows_per = [prepared.instance_rows[i] for i in instances]
    rows = np.concatenate(rows_per)
    sizes = np.array([len(r) for r in rows_per])
    h = prepared.embeddings[rows]
    prompted = model.gates(rows) * h
    if len(rows) == len(instances):
        return prompted, (rows, sizes, h)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return np.add.reduceat(prompted, starts, axis=0) / sizes[:, None], (rows, sizes, h)


def support_loss_and_grad(model, prepared: PromptData, task: FewShotTask, tau: float) -> float:
    """Prototype loss over the support set; accumulates gradients into ``model``'s params."""
    ids = [i for i, _ in task.support]
    index = {c: k for k, c in enumerate(task.classes)}
    y_idx = np.array([index[c] for _, c in task.support])
    z, (rows, sizes, h) = instance_embeddings(model, prepared, ids)
    loss, dz = prototype_loss_and_grad(z, y_idx, len(task.classes), tau)
    dprompted = np.repeat(dz / sizes[:, None], sizes, axis=0)
    model.backward(rows, dprompted * h)
    return loss


@dataclass
class TuneConfig:
    delta: int = 2
    tau: float = 0.5
    epochs: int = 2000
    patience: int = 50
    optimizer: AdamConfig = field(default_factory=lambda: AdamConfig(lr=1e-3))
    seed: int = DEFAULT_SEED


@dataclass
class TuneResult:
    model: object
    losses: list[float]
    best_epoch: int
    optimizer_params: list[Param]


def fit_prompt(model, prepared: PromptData, task: FewShotTask, cfg: TuneConfig) -> TuneResult:
    """Adam on the prompt parameters with early stopping; restores the best parameters."""
    params = model.params()
    opt = Adam(params, cfg.optimizer)
    losses = []
    best, best_epoch, best_values = math.inf, -1, None
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        loss = support_loss_and_grad(model, prepared, task, cfg.tau)
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite downstream loss at epoch {epoch}")
        losses.append(loss)
        if loss < best:
            best, best_epoch = loss, epoch
            best_values = [p.value.copy() for p in params]
        if epoch - best_epoch >= cfg.patience or not params:
            break
        opt.step()
    if best_values is not None:
        for p, v in zip(params, best_values):
            p.value = v
    opt.zero_grad()
    return TuneResult(model, losses, best_epoch, list(opt.params))


def tune(cn: ConditionNet, enc: GcnEncoder, task: FewShotTask, data, cfg: TuneConfig | None = None,
         prepared: PromptData | None = None) -> TuneResult:
    """Fit ``cn`` to a few-shot task on top of a frozen encoder.

    Embeddings and readouts are computed once (they depend only on the frozen
    encoder); each epoch regenerates prompts, prompted embeddings, graph
    embeddings and prototypes from the current condition-net.
    """
    cfg = cfg or TuneConfig()
    if not enc.frozen:
        raise FreezeViolationError("prompt tuning requires a frozen encoder")
    prepared = prepared or prepare_prompt_data(enc, data, cfg.delta)
    if prepared.instance_kind != task.instance_kind:
        raise DataError(f"{task.instance_kind} task on {prepared.instance_kind}-level data")
    return fit_prompt(ConditionalPrompt(cn, prepared.conditions), prepared, task, cfg)


def evaluate_task(model, prepared: PromptData, task: FewShotTask):
    """Predict the query instances; returns ``(predictions, true_labels)``."""
    sup_ids = [i for i, _ in task.support]
    z_sup, _ = instance_embeddings(model, prepared, sup_ids)
    protos = class_prototypes(list(zip(z_sup, [c for _, c in task.support])), task.classes)
    q_ids = [i for i, _ in task.query]
    if not q_ids:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    z_q, _ = instance_embeddings(model, prepared, q_ids)
    return predict_batch(z_q, protos), np.array([c for _, c in task.query])


def save_condition_net(cn: ConditionNet, path) -> None:
    save_checkpoint(path, cn.params(), {"kind": "condition_net", "task_id": cn.task_id,
                                        "activations": [cn.mlp.activation, cn.mlp.output_activation]})


def load_condition_net(path) -> ConditionNet:
    values, meta = load_checkpoint(path)
    if meta.get("kind") != "condition_net":
        raise ValueError(f"{path} is not a condition-net checkpoint")
    w1, b1, w2, b2 = (Param(v, n) for v, n in zip(values, meta["names"]))
    act, out = meta["activations"]
    return ConditionNet(Mlp(w1, b1, w2, b2, act, out), meta.get("task_id", ""))
