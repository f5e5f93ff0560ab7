"""Graph data model, homophily analysis, ego-networks, task sampling and file I/O."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, GraphFormatError, InsufficientDataError, UndefinedRatioError

__all__ = [
    "Graph",
    "EgoNetwork",
    "GraphCollection",
    "FewShotTask",
    "load_graph",
    "save_graph",
    "load_collection",
    "save_collection",
    "edge_homophily_counts",
    "graph_homophily_ratio",
    "node_homophily_counts",
    "node_homophily_ratio",
    "ego_network",
    "induced_subgraph",
    "build_ego_dataset",
    "disjoint_union",
    "sample_kshot_task",
    "planted_homophily_graph",
    "homophily_buckets",
    "NUM_BUCKETS",
    "ISOLATED",
    "instance_labels",
]

NUM_BUCKETS = 5
ISOLATED = -1  # bucket flag for nodes without neighbors
UNLABELED = -1


def _readonly(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph in CSR form.

    Instances are immutable and hash by identity, so they can key caches
    (e.g. the normalized operator cached by the encoder).

    Use :meth:`from_edges` rather than the raw constructor unless the CSR
    arrays are already canonical (sorted, symmetric, deduplicated, loop-free).
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    num_classes: int | None = None

    def __post_init__(self):
        n = int(self.num_nodes)
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        feats = np.array(self.features, dtype=np.float64, order="C")
        if feats.ndim == 1:
            feats = feats.reshape(n, -1) if n else feats.reshape(0, 0)
        if offsets.shape != (n + 1,) or offsets[0] != 0:
            raise DataError("row_offsets must have length num_nodes + 1 and start at 0")
        if np.any(np.diff(offsets) < 0) or offsets[-1] != len(cols):
            raise DataError("row_offsets must be nondecreasing and end at len(col_indices)")
        if len(cols) and (cols.min() < 0 or cols.max() >= n):
            raise DataError("node index out of range in col_indices")
        if feats.shape[0] != n:
            raise DataError(f"features has {feats.shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(feats)):
            raise DataError("features contain non-finite values")
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
        if np.any(rows == cols):
            raise DataError("self-loops must not be stored")
        same_row = rows[1:] == rows[:-1]
        if np.any(np.diff(cols)[same_row] <= 0):
            raise DataError("rows must be strictly sorted (duplicate or unordered neighbors)")
        # symmetry: sorted (u, v) pairs must equal sorted (v, u) pairs
        fwd = rows * max(n, 1) + cols
        bwd = cols * max(n, 1) + rows
        if not np.array_equal(np.sort(fwd), np.sort(bwd)):
            raise DataError("adjacency is not symmetric")
        labels = self.labels
        if labels is not None:
            labels = np.ascontiguousarray(labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DataError("labels must have one entry per node")
            if np.any(labels < UNLABELED):
                raise DataError("labels must be >= 0 (or -1 for unlabeled)")
            if self.num_classes is not None and np.any(labels >= self.num_classes):
                raise DataError("label index >= declared class count")
            _readonly(labels)
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "row_offsets", _readonly(offsets))
        object.__setattr__(self, "col_indices", _readonly(cols))
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_edges(cls, num_nodes, edges, features=None, labels=None, num_classes=None):
        """Build a graph from an edge list.

        Edges are symmetrized, duplicates collapsed and self-loops dropped.
        Missing features default to a single all-ones column.
        """
        n = int(num_nodes)
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= n):
            raise DataError("node index out of range")
        e = e[e[:, 0] != e[:, 1]]
        both = np.concatenate([e, e[:, ::-1]])
        keys = np.unique(both[:, 0] * max(n, 1) + both[:, 1])
        src, dst = keys // max(n, 1), keys % max(n, 1)
        offsets = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))]).astype(np.int64)
        if features is None:
            features = np.ones((n, 1))
        return cls(n, offsets, dst, features, labels, num_classes)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.col_indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def has_edge(self, u: int, v: int) -> bool:
        seg = self.neighbors(u)
        i = np.searchsorted(seg, v)
        return bool(i < len(seg) and seg[i] == v)

    def edges(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with u < v, in CSR order."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        mask = rows < self.col_indices
        return np.stack([rows[mask], self.col_indices[mask]], axis=1)

    def with_features(self, features) -> "Graph":
        return Graph(self.num_nodes, self.row_offsets, self.col_indices, features, self.labels, self.num_classes)

    def with_edges(self, edges) -> "Graph":
        return Graph.from_edges(self.num_nodes, edges, self.features, self.labels, self.num_classes)

    def edge_subset(self, keep) -> "Graph":
        """Graph keeping only ``self.edges()[keep]`` (boolean mask or index array).

        A subset of a canonical edge set is canonical, so validation is skipped.
        """
        e = self.edges()[keep]
        n = self.num_nodes
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        offsets = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))]).astype(np.int64)
        return _trusted_graph(n, offsets, dst[order], self.features, self.labels, self.num_classes)


def _trusted_graph(n, offsets, cols, features, labels=None, num_classes=None) -> Graph:
    """Build a Graph from arrays already known to be canonical."""
    g = Graph.__new__(Graph)
    object.__setattr__(g, "num_nodes", int(n))
    object.__setattr__(g, "row_offsets", _readonly(np.ascontiguousarray(offsets, dtype=np.int64)))
    object.__setattr__(g, "col_indices", _readonly(np.ascontiguousarray(cols, dtype=np.int64)))
    feats = features if not features.flags.writeable else _readonly(np.array(features, dtype=np.float64))
    object.__setattr__(g, "features", feats)
    object.__setattr__(g, "labels", labels)
    object.__setattr__(g, "num_classes", num_classes)
    return g


@dataclass(frozen=True)
class EgoNetwork:
    center: int
    members: tuple[int, ...]
    local_index: dict = field(repr=False, compare=False)

    def __post_init__(self):
        if self.center not in self.local_index:
            raise DataError("ego-network center must be a member")


@dataclass(frozen=True)
class GraphCollection:
    graphs: tuple[Graph, ...]
    graph_labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.graph_labels is not None:
            labels = tuple(int(y) for y in self.graph_labels)
            if len(labels) != len(self.graphs):
                raise DataError("graph_labels needs one entry per graph")
            object.__setattr__(self, "graph_labels", labels)

    def __len__(self):
        return len(self.graphs)


@dataclass(frozen=True)
class FewShotTask:
    classes: tuple[int, ...]
    support: tuple[tuple[int, int], ...]
    query: tuple[tuple[int, int], ...]
    instance_kind: str = "node"

    def __post_init__(self):
        if self.instance_kind not in ("node", "graph"):
            raise ValueError(f"unknown instance kind {self.instance_kind!r}")
        ids = {i for i, _ in self.support}
        if ids & {i for i, _ in self.query}:
            raise DataError("support and query overlap")
        cls = set(self.classes)
        if any(c not in cls for _, c in self.support + self.query):
            raise DataError("task contains a class outside its class set")

    @property
    def shots(self) -> int:
        return len(self.support) // max(len(self.classes), 1)


# ---------------------------------------------------------------------------
# canonical text format


def _strip_comment(line):
    return line.split("#", 1)[0].strip()


def load_graph(path) -> Graph:
    """Read a graph in the canonical line-oriented text format.

    Format::

        nodes <N> features <d> classes <C|none>
        node <id> <f_1> ... <f_d> [label <c>]     (N lines)
        edges
        <u> <v>                                  (one per line)

    ``#`` starts a comment. Edges are symmetrized and duplicates collapsed.
    Unlabeled nodes in a labeled file are allowed and stored as -1.

    Raises
    ------
    GraphFormatError
        With the offending line number for any structural problem.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    content = [(i + 1, _strip_comment(s)) for i, s in enumerate(lines)]
    content = [(no, s) for no, s in content if s]
    if not content:
        raise GraphFormatError("empty file", 1)

    lineno, header = content[0]
    tok = header.split()
    if len(tok) != 6 or tok[0] != "nodes" or tok[2] != "features" or tok[4] != "classes":
        raise GraphFormatError("malformed header, expected 'nodes <N> features <d> classes <C|none>'", lineno)
    try:
        n, d = int(tok[1]), int(tok[3])
        num_classes = None if tok[5] == "none" else int(tok[5])
    except ValueError:
        raise GraphFormatError("malformed header, non-integer count", lineno) from None
    if n < 0 or d < 0 or (num_classes is not None and num_classes < 1):
        raise GraphFormatError("malformed header, negative count", lineno)

    features = np.zeros((n, d))
    labels = np.full(n, UNLABELED, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    pos = 1
    for _ in range(n):
        if pos >= len(content):
            raise GraphFormatError(f"expected {n} node lines", content[-1][0])
        lineno, s = content[pos]
        tok = s.split()
        if tok[0] != "node" or len(tok) < 2:
            raise GraphFormatError("expected 'node <id> ...' line", lineno)
        try:
            v = int(tok[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id {tok[1]!r}", lineno) from None
        if not 0 <= v < n:
            raise GraphFormatError(f"node index out of range: {v}", lineno)
        if seen[v]:
            raise GraphFormatError(f"node {v} declared twice", lineno)
        seen[v] = True
        rest = tok[2:]
        if len(rest) == d + 2 and rest[d] == "label":
            if num_classes is None:
                raise GraphFormatError("label given but header declares classes none", lineno)
            try:
                c = int(rest[d + 1])
            except ValueError:
                raise GraphFormatError(f"non-integer label {rest[d + 1]!r}", lineno) from None
            if not 0 <= c < num_classes:
                raise GraphFormatError(f"label index {c} >= declared class count {num_classes}", lineno)
            labels[v] = c
            rest = rest[:d]
        elif len(rest) != d:
            raise GraphFormatError(f"expected {d} feature values", lineno)
        for j, t in enumerate(rest):
            try:
                features[v, j] = float(t)
            except ValueError:
                raise GraphFormatError(f"non-numeric feature token {t!r}", lineno) from None
            if not np.isfinite(features[v, j]):
                raise GraphFormatError(f"non-finite feature token {t!r}", lineno)
        pos += 1

    if pos >= len(content) or content[pos][1] != "edges":
        at = content[pos][0] if pos < len(content) else content[-1][0]
        raise GraphFormatError("expected 'edges' section marker", at)
    pos += 1
    edges = []
    for lineno, s in content[pos:]:
        tok = s.split()
        if len(tok) != 2:
            raise GraphFormatError("edge line must be '<u> <v>'", lineno)
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise GraphFormatError("non-integer edge endpoint", lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"node index out of range in edge ({u}, {v})", lineno)
        edges.append((u, v))

    has_labels = num_classes is not None
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2), features,
                            labels if has_labels else None, num_classes)


def save_graph(g: Graph, path) -> None:
    """Write ``g`` in the canonical text format (floats in repr precision)."""
    classes = "none" if g.num_classes is None and g.labels is None else (
        g.num_classes if g.num_classes is not None else int(g.labels.max()) + 1)
    out = [f"nodes {g.num_nodes} features {g.feature_dim} classes {classes}"]
    for v in range(g.num_nodes):
        parts = ["node", str(v)] + [repr(float(x)) for x in g.features[v]]
        if g.labels is not None and g.labels[v] != UNLABELED:
            parts += ["label", str(int(g.labels[v]))]
        out.append(" ".join(parts))
    out.append("edges")
    out.extend(f"{u} {v}" for u, v in g.edges())
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def load_collection(directory) -> GraphCollection:
    """Load a directory holding ``collection.txt`` plus one canonical file per graph."""
    directory = Path(directory)
    index = directory / "collection.txt"
    if not index.exists():
        raise GraphFormatError(f"missing index file {index}")
    graphs, labels = [], []
    for lineno, raw in enumerate(index.read_text(encoding="utf-8").splitlines(), 1):
        s = _strip_comment(raw)
        if not s:
            continue
        tok = s.split()
        if len(tok) != 2:
            raise GraphFormatError("index line must be '<filename> <graph_label|none>'", lineno)
        graphs.append(load_graph(directory / tok[0]))
        if tok[1] == "none":
            labels.append(None)
        else:
            try:
                labels.append(int(tok[1]))
            except ValueError:
                raise GraphFormatError(f"non-integer graph label {tok[1]!r}", lineno) from None
    if any(y is None for y in labels):
        if not all(y is None for y in labels):
            raise GraphFormatError("graph labels must be given for all graphs or none")
        return GraphCollection(tuple(graphs), None)
    return GraphCollection(tuple(graphs), tuple(labels))


def save_collection(coll: GraphCollection, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, g in enumerate(coll.graphs):
        name = f"graph_{i:05d}.txt"
        save_graph(g, directory / name)
        y = "none" if coll.graph_labels is None else coll.graph_labels[i]
        lines.append(f"{name} {y}")
    (directory / "collection.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# homophily


def _labels_of(g, labels):
    y = g.labels if labels is None else np.asarray(labels, dtype=np.int64)
    if y is None:
        raise DataError("graph has no labels")
    if y.shape != (g.num_nodes,):
        raise DataError("labels must have one entry per node")
    return y


def edge_homophily_counts(g: Graph, labels=None) -> tuple[int, int]:
    """Return ``(same_label_edges, total_edges)`` over undirected edges."""
    y = _labels_of(g, labels)
    e = g.edges()
    if np.any(y[e[:, 0]] < 0) or np.any(y[e[:, 1]] < 0):
        raise DataError("every edge endpoint must be labeled")
    return int(np.count_nonzero(y[e[:, 0]] == y[e[:, 1]])), len(e)


def graph_homophily_ratio(g: Graph, labels=None) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    same, total = edge_homophily_counts(g, labels)
    if total == 0:
        raise UndefinedRatioError("undefined ratio: graph has no edges")
    return same / total


def node_homophily_counts(g: Graph, v: int, labels=None) -> tuple[int, int]:
    y = _labels_of(g, labels)
    nbrs = g.neighbors(v)
    return int(np.count_nonzero(y[nbrs] == y[v])), len(nbrs)


def node_homophily_ratio(g: Graph, v: int, labels=None) -> float:
    """Fraction of ``v``'s neighbors sharing its label; isolated nodes raise."""
    same, deg = node_homophily_counts(g, v, labels)
    if deg == 0:
        raise UndefinedRatioError(f"undefined ratio: node {v} is isolated")
    return same / deg


def homophily_buckets(g: Graph, labels=None) -> np.ndarray:
    """Bucket nodes by node homophily ratio into five bins of width 0.2.

    The last bin is closed ([0.8, 1.0]); isolated nodes get ``ISOLATED``.
    Integer arithmetic keeps boundaries exact (0.2 lands in bucket 1).
    """
    y = _labels_of(g, labels)
    deg = g.degrees()
    rows = np.repeat(np.arange(g.num_nodes), deg)
    same = np.bincount(rows, weights=(y[rows] == y[g.col_indices]), minlength=g.num_nodes).astype(np.int64)
    out = np.full(g.num_nodes, ISOLATED, dtype=np.int64)
    nz = deg > 0
    out[nz] = np.minimum(NUM_BUCKETS * same[nz] // deg[nz], NUM_BUCKETS - 1)
    return out


# ---------------------------------------------------------------------------
# ego-networks


def ego_network(g: Graph, v: int, delta: int) -> EgoNetwork:
    """Nodes within ``delta`` hops of ``v`` (BFS), in ascending id order."""
    if not 0 <= v < g.num_nodes:
        raise DataError(f"node {v} out of range")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    dist = {int(v): 0}
    frontier = deque([int(v)])
    while frontier:
        u = frontier.popleft()
        if dist[u] == delta:
            continue
        for w in g.neighbors(u):
            w = int(w)
            if w not in dist:
                dist[w] = dist[u] + 1
                frontier.append(w)
    members = tuple(sorted(dist))
    return EgoNetwork(int(v), members, {m: i for i, m in enumerate(members)})


def induced_subgraph(g: Graph, members: Sequence[int]) -> Graph:
    """Subgraph on ``members`` (relabelled 0..k-1 in the given order) with all edges among them."""
    members = np.asarray(members, dtype=np.int64)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[members] = np.arange(len(members))
    e = g.edges()
    keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)
    sub_edges = local[e[keep]]
    labels = None if g.labels is None else g.labels[members]
    return Graph.from_edges(len(members), sub_edges, g.features[members], labels, g.num_classes)


def build_ego_dataset(g: Graph, delta: int) -> GraphCollection:
    """One induced ego-subgraph per labeled node, labelled by its center."""
    if g.labels is None:
        raise DataError("ego dataset construction requires node labels")
    graphs, labels = [], []
    for v in range(g.num_nodes):
        if g.labels[v] == UNLABELED:
            continue
        ego = ego_network(g, v, delta)
        graphs.append(induced_subgraph(g, ego.members))
        labels.append(int(g.labels[v]))
    return GraphCollection(tuple(graphs), tuple(labels))


def disjoint_union(graphs: Sequence[Graph]) -> tuple[Graph, np.ndarray]:
    """Block-diagonal union of ``graphs`` plus row offsets of each block."""
    sizes = np.array([h.num_nodes for h in graphs], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    total = int(starts[-1])
    offsets = [np.zeros(1, dtype=np.int64)]
    cols = []
    stored = 0
    for h, s in zip(graphs, starts[:-1]):
        offsets.append(h.row_offsets[1:] + stored)
        cols.append(h.col_indices + s)
        stored += len(h.col_indices)
    row_offsets = np.concatenate(offsets)
    col_indices = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    feats = np.concatenate([h.features for h in graphs]) if graphs else np.zeros((0, 0))
    # blocks are canonical already, so skip the re-validation
    return _trusted_graph(total, row_offsets, col_indices, np.ascontiguousarray(feats, dtype=np.float64)), starts


# ---------------------------------------------------------------------------
# few-shot sampling


def sample_kshot_task(labels, k: int, q: int, seed: int, instance_kind: str = "node") -> FewShotTask:
    """Sample ``k`` support and ``q`` query instances per class without replacement.

    ``labels`` holds one class per instance; negative entries are unlabeled
    and never sampled. The result is a pure function of the arguments.
    """
    y = np.asarray(labels, dtype=np.int64)
    if k < 1 or q < 0:
        raise ValueError("need k >= 1 and q >= 0")
    classes = tuple(int(c) for c in np.unique(y[y >= 0]))
    rng = np.random.default_rng(seed)
    support, query = [], []
    for c in classes:
        pool = np.flatnonzero(y == c)
        if len(pool) < k + q:
            raise InsufficientDataError(
                f"class {c} has {len(pool)} instances, needs {k + q} (k={k}, q={q})")
        pick = rng.permutation(pool)[: k + q]
        support += [(int(i), c) for i in pick[:k]]
        query += [(int(i), c) for i in pick[k:]]
    return FewShotTask(classes, tuple(support), tuple(query), instance_kind)


# ---------------------------------------------------------------------------
# synthetic graphs


def _sample_pairs(rng, count, draw, limit, max_tries):
    """Draw ``count`` distinct undirected pairs from ``draw()`` (rejection)."""
    if count > limit:
        raise DataError(f"cannot place {count} distinct edges among {limit} candidate pairs")
    chosen = set()
    tries = 0
    while len(chosen) < count:
        tries += 1
        if tries > max_tries:
            raise DataError("edge sampling exceeded retry budget")
        u, v = draw()
        if u == v:
            continue
        chosen.add((min(u, v), max(u, v)))
    return sorted(chosen)


def planted_homophily_graph(n: int, c: int, target_h: float, avg_degree: float, seed: int,
                            noise: float = 0.01, max_tries: int | None = None) -> Graph:
    """Random labeled graph whose edge homophily ratio is close to ``target_h``.

    Labels are assigned round-robin (``v % c``). Exactly ``round(target_h * m)``
    of the ``m = round(n * avg_degree / 2)`` edges join same-label nodes; the
    rest join different labels, each drawn uniformly among the admissible
    pairs. Features are the one-hot label plus uniform noise in
    ``[-noise, noise]``, so same-label nodes are always more cosine-similar
    than different-label ones.
    """
    if not 0.0 <= target_h <= 1.0:
        raise ValueError("target_h must lie in [0, 1]")
    if c < 1 or n < 2 * c:
        raise DataError("need c >= 1 and n >= 2c")
    rng = np.random.default_rng(seed)
    y = np.arange(n) % c
    m = int(round(n * avg_degree / 2))
    m_intra = int(round(target_h * m))
    m_inter = m - m_intra
    by_class = [np.flatnonzero(y == k) for k in range(c)]
    sizes = np.array([len(b) for b in by_class])
    intra_pairs = int(np.sum(sizes * (sizes - 1) // 2))
    inter_pairs = n * (n - 1) // 2 - intra_pairs
    budget = max_tries or 50 * (m + 10)

    def draw_intra():
        k = rng.choice(c, p=sizes * (sizes - 1) / max(2 * intra_pairs, 1))
        u, v = rng.choice(by_class[k], size=2, replace=False)
        return int(u), int(v)

    def draw_inter():
        u, v = rng.integers(n, size=2)
        while y[u] == y[v]:
            u, v = rng.integers(n, size=2)
        return int(u), int(v)

    intra = _sample_pairs(rng, m_intra, draw_intra, intra_pairs, budget)
    inter = _sample_pairs(rng, m_inter, draw_inter, inter_pairs, budget) if m_inter else []
    edges = np.array(intra + inter, dtype=np.int64).reshape(-1, 2)
    feats = np.eye(c)[y] + rng.uniform(-noise, noise, size=(n, c))
    g = Graph.from_edges(n, edges, feats, y, c)
    if g.num_edges == 0:
        raise DataError("planted graph has no edges; increase avg_degree")
    realized = graph_homophily_ratio(g)
    if abs(realized - target_h) > 0.05:
        raise DataError(f"infeasible target homophily {target_h}: realized {realized:.3f}")
    return g


def instance_labels(data) -> np.ndarray:
    """Labels of the classification instances in ``data`` (nodes or graphs)."""
    if isinstance(data, Graph):
        if data.labels is None:
            raise DataError("graph has no node labels")
        return np.asarray(data.labels)
    if data.graph_labels is None:
        raise DataError("collection has no graph labels")
    return np.asarray(data.graph_labels, dtype=np.int64)
