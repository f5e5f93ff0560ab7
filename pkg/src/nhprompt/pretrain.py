"""Contrastive pre-training and empirical checks of the homophily-task results.

Every contrastive task here is expressed in one standardized form: each
anchor ``u`` has a positive set ``A_u`` and a negative set ``B_u`` and the loss
is ``-sum_u ln P(u)`` with ``P(u) = S(A_u) / (S(A_u) + S(B_u))``, ``S`` summing
kernel similarities between the anchor and the set members.

Anchors, positives and negatives are *instances*. An instance is the mean of
some rows of an encoded *view* (a graph the encoder runs on): a single node of
the source graph, a pooled augmented graph, a graph summary, or a node of a
corrupted copy. Link prediction only uses plain nodes of the source graph,
which is exactly what makes it a homophily task.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.stats import spearmanr

from .encoder import GcnEncoder, encode, encode_backward
from .errors import DataError, FreezeViolationError, InsufficientDataError, KernelUnsupportedError, NumericalError
from .graph import Graph, GraphCollection, disjoint_union, ego_network, induced_subgraph, planted_homophily_graph
from .numerics import DEFAULT_SEED, Adam, AdamConfig, cosine_matrix, cosine_similarity, paired_cosine

NODE = "node"
VIEW = "view"
SUMMARY = "summary"
CORRUPTED = "corrupted"

HOMOPHILY = "homophily"
NON_HOMOPHILY = "non-homophily"

TASK_KINDS = ("link_prediction", "graphcl", "dgi")


@dataclass(frozen=True)
class Instance:
    """Mean of ``members`` rows of view ``view``; ``members=None`` pools every row."""

    kind: str
    view: int
    members: tuple[int, ...] | None = None


@dataclass(eq=False)
class ContrastiveTask:
    anchors: tuple[int, ...]
    positives: tuple[tuple[int, ...], ...]
    negatives: tuple[tuple[int, ...], ...]
    instances: tuple[Instance, ...]
    views: tuple[Graph, ...]
    _pool: sp.csr_matrix | None = field(default=None, repr=False)
    _union: tuple | None = field(default=None, repr=False)
    _pairs: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (len(self.anchors) == len(self.positives) == len(self.negatives)):
            raise DataError("anchors, positives and negatives must align")
        self.anchors = tuple(int(a) for a in self.anchors)
        self.positives = tuple(np.asarray(p, dtype=np.int64).reshape(-1) for p in self.positives)
        self.negatives = tuple(np.asarray(b, dtype=np.int64).reshape(-1) for b in self.negatives)
        n = len(self.instances)
        for a, pos, neg in zip(self.anchors, self.positives, self.negatives):
            if len(pos) == 0 or len(neg) == 0:
                raise DataError(f"anchor {a} needs at least one positive and one negative")
        flat = np.concatenate([np.asarray(self.anchors, dtype=np.int64), *self.positives, *self.negatives])
        if flat.size and (flat.min() < 0 or flat.max() >= n):
            raise DataError("instance handle out of range")
        for inst in self.instances:
            if not 0 <= inst.view < len(self.views):
                raise DataError("instance refers to a missing view")

    @classmethod
    def from_nodes(cls, g: Graph, anchors, positives, negatives) -> "ContrastiveTask":
        """Task whose instances are the nodes of ``g`` (instance ``i`` is node ``i``)."""
        instances = tuple(Instance(NODE, 0, (i,)) for i in range(g.num_nodes))
        return cls(tuple(anchors), tuple(positives), tuple(negatives), instances, (g,))

    def union(self):
        """Disjoint union of all views and the first row of each view in it."""
        if self._union is None:
            self._union = disjoint_union(self.views)
        return self._union

    def pooling(self) -> sp.csr_matrix:
        """Sparse ``instances x union_rows`` averaging matrix."""
        if self._pool is None:
            _, starts = self.union()
            rows, cols, vals = [], [], []
            for i, inst in enumerate(self.instances):
                base = starts[inst.view]
                if inst.members is None:
                    members = np.arange(starts[inst.view + 1] - base)
                else:
                    members = np.asarray(inst.members, dtype=np.int64)
                if len(members) == 0:
                    raise DataError("instance pools an empty view")
                rows.append(np.full(len(members), i))
                cols.append(members + base)
                vals.append(np.full(len(members), 1.0 / len(members)))
            self._pool = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(len(self.instances), int(starts[-1])))
        return self._pool

    def pairs(self):
        """Flattened (term, anchor, other, is_positive) arrays over all anchor pairs."""
        if self._pairs is None:
            sizes = [len(p) + len(n) for p, n in zip(self.positives, self.negatives)]
            term = np.repeat(np.arange(len(self.anchors)), sizes)
            other = np.concatenate([x for p, n in zip(self.positives, self.negatives) for x in (p, n)])
            is_pos = np.concatenate([np.r_[np.ones(len(p), bool), np.zeros(len(n), bool)]
                                     for p, n in zip(self.positives, self.negatives)])
            self._pairs = (term, np.asarray(self.anchors, dtype=np.int64)[term], other, is_pos)
        return self._pairs

    def triplet_count(self) -> int:
        return sum(len(p) * len(n) for p, n in zip(self.positives, self.negatives))


@dataclass(frozen=True)
class SimilarityKernel:
    """``raw-cosine`` or ``exp-cosine`` (``exp(cos / tau)``)."""

    kind: str = "exp-cosine"
    tau: float = 0.5

    def __post_init__(self):
        if self.kind not in ("raw-cosine", "exp-cosine"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def __call__(self, cos):
        if self.kind == "raw-cosine":
            return cos
        return np.exp(np.asarray(cos) / self.tau)


# ---------------------------------------------------------------------------
# loss


_DENSE_LIMIT = 4_000_000  # instances**2 below which the full cosine matrix is used


def _scatter_rows(index, values, n):
    """``out[index[k]] += values[k]`` as a sparse product (deterministic, fast)."""
    op = sp.csr_matrix((np.ones(len(index)), (index, np.arange(len(index)))), shape=(n, len(index)))
    return np.asarray(op @ values)


def _pair_cosines(emb, anchor, other):
    """Cosines of (anchor, other) pairs and a backward closure returning d(emb)."""
    n = emb.shape[0]
    if n * n <= _DENSE_LIMIT:
        cmat, backward = cosine_matrix(emb, emb)
        flat = anchor * n + other

        def grad(dcos):
            dmat = np.bincount(flat, weights=dcos, minlength=n * n).reshape(n, n)
            dx, dy = backward(dmat)
            return dx + dy

        return cmat.reshape(-1)[flat], grad

    cos, backward = paired_cosine(emb[anchor], emb[other])

    def grad(dcos):
        da, do = backward(dcos)
        return _scatter_rows(anchor, da, n) + _scatter_rows(other, do, n)

    return cos, grad


def _loss_parts(emb, task, kernel):
    if kernel.kind != "exp-cosine":
        raise KernelUnsupportedError("standardized loss needs a strictly positive kernel (exp-cosine)")
    emb = np.asarray(emb, dtype=np.float64)
    if emb.shape[0] != len(task.instances):
        raise DataError(f"embedding has {emb.shape[0]} rows, task has {len(task.instances)} instances")
    term, anchor, other, is_pos = task.pairs()
    cos, grad_fn = _pair_cosines(emb, anchor, other)
    k = kernel(cos)
    m = len(task.anchors)
    s_pos = np.bincount(term, weights=np.where(is_pos, k, 0.0), minlength=m)
    s_all = np.bincount(term, weights=k, minlength=m)
    return term, is_pos, k, s_pos, s_all, s_pos / s_all, grad_fn


def standardized_contrastive_loss(emb, task: ContrastiveTask, kernel: SimilarityKernel = SimilarityKernel()):
    """Return ``(loss, P)`` where ``P`` holds one probability per anchor term.

    ``emb`` has one row per task instance.
    """
    *_, prob, _ = _loss_parts(emb, task, kernel)
    loss = float(-np.sum(np.log(prob)))
    if not math.isfinite(loss):
        raise NumericalError("contrastive loss is not finite")
    return loss, prob


def contrastive_loss_and_grad(emb, task: ContrastiveTask, kernel: SimilarityKernel = SimilarityKernel()):
    """Loss and its gradient with respect to the instance embeddings."""
    term, is_pos, k, s_pos, s_all, prob, grad_fn = _loss_parts(emb, task, kernel)
    loss = float(-np.sum(np.log(prob)))
    if not math.isfinite(loss):
        raise NumericalError("contrastive loss is not finite")
    # per term: L = -ln S_pos + ln S_all
    dk = np.where(is_pos, -1.0 / s_pos[term], 0.0) + 1.0 / s_all[term]
    return loss, grad_fn(dk * k / kernel.tau)


# ---------------------------------------------------------------------------
# homophily samples and tasks


def classify_sample(g: Graph, emb, u: int, a: int, b: int, sim=cosine_similarity) -> str:
    """Label triplet ``(u, a, b)`` as a homophily or non-homophily sample.

    Requires ``(u, a)`` to be an edge and ``(u, b)`` a non-edge. Ties count as
    non-homophily.
    """
    if not g.has_edge(u, a) or g.has_edge(u, b) or u == b:
        raise DataError(f"invalid triplet ({u}, {a}, {b}): need (u,a) in E and (u,b) not in E")
    return HOMOPHILY if sim(emb[u], emb[a]) > sim(emb[u], emb[b]) else NON_HOMOPHILY


def _same_graph(a: Graph, b: Graph) -> bool:
    return a is b or (a.num_nodes == b.num_nodes
                      and np.array_equal(a.row_offsets, b.row_offsets)
                      and np.array_equal(a.col_indices, b.col_indices))


def is_homophily_task(task: ContrastiveTask, g: Graph) -> bool:
    """True iff every positive is a neighbor and every negative a non-neighbor of its anchor.

    Any handle that is not a plain node of ``g`` makes the task non-homophily.
    """
    def node_of(i):
        inst = task.instances[i]
        if inst.kind != NODE or inst.members is None or len(inst.members) != 1:
            return None
        if not _same_graph(task.views[inst.view], g):
            return None
        return inst.members[0]

    for a, pos, neg in zip(task.anchors, task.positives, task.negatives):
        u = node_of(a)
        if u is None:
            return False
        for x in pos:
            v = node_of(x)
            if v is None or not g.has_edge(u, v):
                return False
        for x in neg:
            v = node_of(x)
            if v is None or v == u or g.has_edge(u, v):
                return False
    return True


def build_link_prediction_task(g: Graph, negatives_per_anchor: int = 1, seed: int = DEFAULT_SEED,
                               positives_per_anchor: int = 1, anchors=None) -> ContrastiveTask:
    """Neighbors as positives, non-neighbors as negatives, sampled uniformly.

    Anchors default to every node with at least one neighbor.
    """
    rng = np.random.default_rng(seed)
    deg = g.degrees()
    anchors = np.flatnonzero(deg > 0) if anchors is None else np.asarray(anchors, dtype=np.int64)
    if len(anchors) == 0:
        raise InsufficientDataError("graph has no edges; link prediction needs anchors with neighbors")
    pos_sets, neg_sets = [], []
    for u in anchors:
        nbrs = g.neighbors(u)
        free = g.num_nodes - 1 - len(nbrs)
        if len(nbrs) < positives_per_anchor:
            raise InsufficientDataError(f"node {u} has {len(nbrs)} neighbors, needs {positives_per_anchor}")
        if free < negatives_per_anchor:
            raise InsufficientDataError(
                f"node {u} has {free} non-neighbors, needs {negatives_per_anchor}; graph too dense or small")
        pos_sets.append(tuple(int(x) for x in rng.choice(nbrs, positives_per_anchor, replace=False)))
        if free <= 4 * negatives_per_anchor:
            mask = np.ones(g.num_nodes, dtype=bool)
            mask[nbrs] = False
            mask[u] = False
            neg = rng.choice(np.flatnonzero(mask), negatives_per_anchor, replace=False)
        else:
            chosen = []
            while len(chosen) < negatives_per_anchor:
                v = int(rng.integers(g.num_nodes))
                if v != u and v not in chosen and not g.has_edge(u, v):
                    chosen.append(v)
            neg = chosen
        neg_sets.append(tuple(int(x) for x in neg))
    return ContrastiveTask.from_nodes(g, anchors, pos_sets, neg_sets)


def augment_edge_drop(g: Graph, ratio: float, seed: int) -> Graph:
    """Drop ``floor(ratio * |E|)`` undirected edges uniformly at random."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must lie in [0, 1)")
    e = g.edges()
    drop = int(math.floor(ratio * len(e)))
    if drop == 0:
        return g
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(e), len(e) - drop, replace=False))
    return g.edge_subset(keep)


def ego_subgraphs(g: Graph, delta: int) -> GraphCollection:
    """Induced ``delta``-hop ego-subgraph of every node (labels ignored)."""
    return GraphCollection(tuple(induced_subgraph(g, ego_network(g, v, delta).members) for v in range(g.num_nodes)))


def build_graphcl_task(source, ratio: float = 0.2, seed: int = DEFAULT_SEED, delta: int = 2,
                       views_per_instance: int = 2, batch_size: int | None = None) -> ContrastiveTask:
    """Two edge-dropped views per instance; the other instances' views are negatives.

    ``source`` is a collection (instances are its graphs) or a single graph
    (instances are its nodes' ego-subgraphs). With ``batch_size`` set, only that
    many instances are sampled.
    """
    if views_per_instance != 2:
        raise ValueError("GraphCL contrasts exactly two views per instance")
    coll = ego_subgraphs(source, delta) if isinstance(source, Graph) else source
    rng = np.random.default_rng(seed)
    ids = np.arange(len(coll))
    if batch_size is not None and batch_size < len(ids):
        ids = np.sort(rng.choice(ids, batch_size, replace=False))
    if len(ids) < 2:
        raise InsufficientDataError("GraphCL needs at least two instances for negatives")
    view_seeds = rng.integers(0, 2**63 - 1, size=(len(ids), 2))
    views, instances = [], []
    for j, i in enumerate(ids):
        for r in range(2):
            views.append(augment_edge_drop(coll.graphs[i], ratio, int(view_seeds[j, r])))
            instances.append(Instance(VIEW, len(views) - 1))
    anchors, pos, neg = [], [], []
    everything = np.arange(len(instances))
    for j in range(len(ids)):
        anchors.append(2 * j)
        pos.append(np.array([2 * j + 1]))
        neg.append(everything[(everything // 2) != j])
    return ContrastiveTask(tuple(anchors), tuple(pos), tuple(neg), tuple(instances), tuple(views))


def corrupt_features(g: Graph, seed: int) -> tuple[Graph, np.ndarray]:
    """Row-shuffle the feature matrix with a non-identity permutation."""
    if g.num_nodes < 2:
        raise InsufficientDataError("corruption needs at least two nodes")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(g.num_nodes)
    while np.array_equal(perm, np.arange(g.num_nodes)):
        perm = rng.permutation(g.num_nodes)
    return g.with_features(g.features[perm]), perm


def build_dgi_task(g: Graph, seed: int = DEFAULT_SEED) -> ContrastiveTask:
    """Graph summary as anchor, true nodes positive, corrupted-graph nodes negative."""
    corrupted, _ = corrupt_features(g, seed)
    n = g.num_nodes
    instances = ([Instance(SUMMARY, 0)]
                 + [Instance(NODE, 0, (i,)) for i in range(n)]
                 + [Instance(CORRUPTED, 1, (i,)) for i in range(n)])
    return ContrastiveTask((0,), (np.arange(1, n + 1),), (np.arange(n + 1, 2 * n + 1),),
                           tuple(instances), (g, corrupted))


# ---------------------------------------------------------------------------
# pre-training loop


def encode_task(enc: GcnEncoder, task: ContrastiveTask) -> np.ndarray:
    union, _ = task.union()
    return np.asarray(task.pooling() @ encode(enc, union))


def task_loss_and_backward(enc: GcnEncoder, task: ContrastiveTask, kernel: SimilarityKernel) -> float:
    """Loss of ``task`` under ``enc``; accumulates encoder gradients."""
    union, _ = task.union()
    h = encode(enc, union)
    pool = task.pooling()
    loss, grad = contrastive_loss_and_grad(np.asarray(pool @ h), task, kernel)
    encode_backward(enc, union, np.asarray(pool.T @ grad))
    return loss


@dataclass
class PretrainConfig:
    task: str = "graphcl"
    epochs: int = 2000
    patience: int = 50
    optimizer: AdamConfig = field(default_factory=AdamConfig)
    tau: float = 0.5
    negatives: int = 1
    edge_drop: float = 0.2
    delta: int = 2
    batch_size: int | None = None
    resample: bool = True
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.task not in TASK_KINDS:
            raise ValueError(f"unknown pre-training task {self.task!r}; choose from {TASK_KINDS}")


@dataclass
class PretrainResult:
    encoder: GcnEncoder
    losses: list[float]
    best_losses: list[float]
    best_epoch: int


def _epoch_seed(seed, epoch):
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def pretrain(enc: GcnEncoder, data, cfg: PretrainConfig | None = None) -> PretrainResult:
    """Minimize the standardized contrastive loss for ``cfg.task`` on ``data``.

    Stochastic task parts (augmentations, negatives, corruptions) are redrawn
    every epoch from ``(seed, epoch)`` unless ``cfg.resample`` is off. Training
    stops after ``cfg.epochs`` or when the best loss has not improved for
    ``cfg.patience`` epochs; the best parameters are restored.
    """
    cfg = cfg or PretrainConfig()
    if enc.frozen:
        raise FreezeViolationError("cannot pre-train a frozen encoder")
    kernel = SimilarityKernel("exp-cosine", cfg.tau)
    if cfg.task == "graphcl" and isinstance(data, Graph):
        data = ego_subgraphs(data, cfg.delta)
    if cfg.task != "graphcl" and not isinstance(data, Graph):
        raise DataError(f"{cfg.task} pre-training needs a single graph")

    def make_task(s):
        if cfg.task == "link_prediction":
            return build_link_prediction_task(data, cfg.negatives, s)
        if cfg.task == "dgi":
            return build_dgi_task(data, s)
        return build_graphcl_task(data, cfg.edge_drop, s, cfg.delta, batch_size=cfg.batch_size)

    opt = Adam(enc.params(), cfg.optimizer)
    losses, best_losses = [], []
    best, best_epoch, best_values = math.inf, -1, None
    task = None
    for epoch in range(cfg.epochs):
        if task is None or cfg.resample:
            task = make_task(_epoch_seed(cfg.seed, epoch if cfg.resample else 0))
        opt.zero_grad()
        loss = task_loss_and_backward(enc, task, kernel)
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite pre-training loss at epoch {epoch}")
        losses.append(loss)
        if loss < best:
            best, best_epoch = loss, epoch
            best_values = [p.value.copy() for p in enc.params()]
        best_losses.append(best)
        if epoch - best_epoch >= cfg.patience:
            break
        opt.step()
    if best_values is not None:
        for p, v in zip(enc.params(), best_values):
            p.value = v
    opt.zero_grad()
    return PretrainResult(enc, losses, best_losses, best_epoch)


# ---------------------------------------------------------------------------
# theorem harnesses


def expected_homophily_samples(task: ContrastiveTask, p_pos: float, p_neg: float) -> float:
    """Expected homophily samples: ``sum_u |A_u||B_u| p_pos (1 - p_neg)``."""
    for p in (p_pos, p_neg):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
    return task.triplet_count() * p_pos * (1.0 - p_neg)


@dataclass
class TheoremReport:
    trials: int
    violations: int
    statistic: float | None
    records: list[dict]
    skipped: int = 0
    means: dict | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "h", "count", "violation"])
            for r in self.records:
                h = r.get("h")
                w.writerow([r["trial"], "" if h is None else repr(h), r.get("count", ""), int(r["violation"])])


def _random_graph(rng, n, p_edge):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p_edge
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1), np.zeros((n, 1)))


def verify_theorem1(trials: int, seed: int = 0, n_nodes: int = 8, dim: int = 4, p_edge: float = 0.4,
                    tau: float = 0.5, max_attempts: int | None = None) -> TheoremReport:
    """Check that adding a homophily sample gives a smaller loss than a non-homophily one.

    Each trial draws a random graph and embeddings, a base link-prediction
    task and two candidate triplets for one anchor. Trials where both
    candidates fall in the same class (via raw cosine) are skipped. The
    losses compare ``base + candidate`` under the exp-cosine kernel.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    kernel = SimilarityKernel("exp-cosine", tau)
    max_attempts = max_attempts or 50 * trials
    records, skipped, violations, attempts = [], 0, 0, 0
    while len(records) < trials:
        attempts += 1
        if attempts > max_attempts:
            raise NumericalError(f"only {len(records)} non-vacuous trials in {max_attempts} attempts")
        g = _random_graph(rng, n_nodes, p_edge)
        deg = g.degrees()
        ok = np.flatnonzero((deg > 0) & (deg < n_nodes - 1))
        if len(ok) == 0:
            continue
        emb = rng.normal(size=(n_nodes, dim))
        base = build_link_prediction_task(g, 1, int(rng.integers(2**31)), anchors=ok)
        u = int(rng.choice(ok))
        nbrs = g.neighbors(u)
        non = np.array([v for v in range(n_nodes) if v != u and not g.has_edge(u, v)])
        cands = [(u, int(rng.choice(nbrs)), int(rng.choice(non))) for _ in range(2)]
        kinds = [classify_sample(g, emb, *c) for c in cands]
        if kinds[0] == kinds[1]:
            skipped += 1
            continue
        hom = cands[kinds.index(HOMOPHILY)]
        non_hom = cands[kinds.index(NON_HOMOPHILY)]

        def loss_with(t):
            task = ContrastiveTask.from_nodes(g, base.anchors + (t[0],), base.positives + ([t[1]],),
                                              base.negatives + ([t[2]],))
            return standardized_contrastive_loss(emb, task, kernel)[0]

        l_h, l_n = loss_with(hom), loss_with(non_hom)
        bad = not l_h < l_n
        violations += bad
        records.append({"trial": len(records), "h": None, "count": "", "violation": bad,
                        "loss_homophily": l_h, "loss_non_homophily": l_n})
    return TheoremReport(trials, violations, None, records, skipped)


def count_homophily_samples(g: Graph, emb, task: ContrastiveTask) -> int:
    """Homophily samples among all (anchor, positive, negative) triplets of a node task."""
    count = 0
    for a, pos, neg in zip(task.anchors, task.positives, task.negatives):
        u = task.instances[a].members[0]
        ps = [task.instances[x].members[0] for x in pos]
        ns = [task.instances[x].members[0] for x in neg]
        cp = np.array([cosine_similarity(emb[u], emb[v]) for v in ps])
        cn = np.array([cosine_similarity(emb[u], emb[v]) for v in ns])
        count += int(np.count_nonzero(cp[:, None] > cn[None, :]))
    return count


def labels_consistent(g: Graph, emb) -> bool:
    """Whether same-label pairs are always more cosine-similar than cross-label pairs, per anchor."""
    unit = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    cos = unit @ unit.T
    same = g.labels[:, None] == g.labels[None, :]
    np.fill_diagonal(same, False)
    lo = np.where(same, cos, np.inf).min(axis=1)
    hi = np.where(~same & ~np.eye(g.num_nodes, dtype=bool), cos, -np.inf).max(axis=1)
    return bool(np.all(lo > hi))


def verify_theorem2(h_grid: Sequence[float], seeds: int = 10, n: int = 200, classes: int = 3,
                    avg_degree: float = 6.0, negatives: int = 5, base_seed: int = 0) -> TheoremReport:
    """Count homophily samples of a link-prediction task on planted graphs over ``h_grid``.

    Embeddings are the planted one-hot-plus-noise features, which satisfy the
    label/similarity consistency premise. The statistic is the Spearman rank
    correlation between ``h`` and the mean count (``None`` for a single ``h``).
    Violations count adjacent grid points where the mean count fails to rise.
    """
    h_grid = [float(h) for h in h_grid]
    if any(b <= a for a, b in zip(h_grid, h_grid[1:])) or any(not 0 <= h <= 1 for h in h_grid):
        raise ValueError("h_grid must be strictly increasing within [0, 1]")
    records, means = [], {}
    trial = 0
    for h in h_grid:
        counts = []
        for s in range(seeds):
            seed = int(np.random.SeedSequence([base_seed, s]).generate_state(1)[0])
            g = planted_homophily_graph(n, classes, h, avg_degree, seed)
            emb = g.features
            task = build_link_prediction_task(g, negatives, seed)
            c = count_homophily_samples(g, emb, task)
            counts.append(c)
            records.append({"trial": trial, "h": h, "count": c, "violation": False,
                            "consistent": labels_consistent(g, emb), "triplets": task.triplet_count()})
            trial += 1
        means[h] = float(np.mean(counts))
    mean_seq = [means[h] for h in h_grid]
    violations = sum(1 for a, b in zip(mean_seq, mean_seq[1:]) if not b > a)
    for r in records:
        i = h_grid.index(r["h"])
        r["violation"] = i > 0 and not mean_seq[i] > mean_seq[i - 1]
    stat = None if len(h_grid) < 2 else float(spearmanr(h_grid, mean_seq).statistic)
    return TheoremReport(len(records), violations, stat, records, means=means)
