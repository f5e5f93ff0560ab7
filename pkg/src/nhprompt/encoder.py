"""GCN encoder with manual backpropagation and a freeze contract."""

from __future__ import annotations

import hashlib
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import FreezeViolationError, ShapeError
from .graph import Graph
from .numerics import (
    ACTIVATIONS,
    DEFAULT_SEED,
    Param,
    activate,
    activate_grad,
    as_matrix,
    glorot_uniform,
    load_checkpoint,
    save_checkpoint,
)


def normalize_adjacency(g: Graph) -> sp.csr_matrix:
    """Symmetric normalization with self-loops, ``D^-1/2 (A + I) D^-1/2``."""
    n = g.num_nodes
    a = sp.csr_matrix((np.ones(len(g.col_indices)), g.col_indices, g.row_offsets), shape=(n, n))
    a = (a + sp.identity(n, format="csr")).tocsr()
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    op = (d @ a @ d).tocsr()
    op.sort_indices()
    return op


@dataclass(eq=False)
class GcnEncoder:
    """Stack of GCN layers ``H_l = act_l(Â H_{l-1} W_l)`` with ``H_0 = X``.

    Hidden layers default to ReLU and the final layer is linear.
    """

    layers: list[Param]
    activations: list[str]
    frozen: bool = False
    _op_cache: weakref.WeakKeyDictionary = field(default_factory=weakref.WeakKeyDictionary, repr=False)

    def __post_init__(self):
        if len(self.layers) != len(self.activations):
            raise ShapeError("one activation per layer")
        for kind in self.activations:
            if kind not in ACTIVATIONS:
                raise ValueError(f"unknown activation {kind!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeError("layer dimensions must chain")

    @classmethod
    def create(cls, dims, seed=DEFAULT_SEED, activation="relu", final_activation="linear"):
        """Glorot-initialized encoder with layer widths ``dims = [d_in, ..., d_out]``."""
        rng = np.random.default_rng(seed)
        layers = [Param(glorot_uniform(a, b, rng), f"gcn{i}") for i, (a, b) in enumerate(zip(dims, dims[1:]))]
        acts = [activation] * (len(layers) - 1) + [final_activation] if layers else []
        return cls(layers, acts)

    @property
    def in_dim(self):
        return self.layers[0].shape[0] if self.layers else None

    @property
    def out_dim(self):
        return self.layers[-1].shape[1] if self.layers else None

    def params(self) -> list[Param]:
        return list(self.layers)

    def operator(self, g: Graph) -> sp.csr_matrix:
        op = self._op_cache.get(g)
        if op is None:
            op = normalize_adjacency(g)
            self._op_cache[g] = op
        return op

    def copy(self) -> "GcnEncoder":
        return GcnEncoder([Param(p.value, p.name) for p in self.layers], list(self.activations))


def _forward(enc: GcnEncoder, g: Graph):
    x = as_matrix(g.features, "features") if g.num_nodes else np.zeros((0, g.feature_dim))
    if enc.layers and x.shape[1] != enc.in_dim:
        raise ShapeError(f"encoder expects {enc.in_dim} features, graph has {x.shape[1]}")
    op = enc.operator(g)
    cache = []
    h = x
    for w, kind in zip(enc.layers, enc.activations):
        agg = np.asarray(op @ h)
        pre = agg @ w.value
        out = activate(pre, kind)
        cache.append((agg, pre, out))
        h = out
    return h, cache


def encode(enc: GcnEncoder, g: Graph) -> np.ndarray:
    """Node embeddings of ``g`` (``|V| x d_out``)."""
    return _forward(enc, g)[0]


def encode_backward(enc: GcnEncoder, g: Graph, upstream) -> np.ndarray:
    """Accumulate layer gradients of ``sum(upstream * encode(enc, g))``.

    Returns the gradient with respect to the input features.
    """
    if enc.frozen:
        raise FreezeViolationError("backward pass on a frozen encoder")
    out, cache = _forward(enc, g)
    grad = as_matrix(upstream, "upstream gradient") if g.num_nodes else np.zeros_like(out)
    if grad.shape != out.shape:
        raise ShapeError(f"upstream gradient shape {grad.shape} != output shape {out.shape}")
    op = enc.operator(g)
    for w, kind, (agg, pre, act) in reversed(list(zip(enc.layers, enc.activations, cache))):
        dpre = grad * activate_grad(pre, act, kind)
        w.accumulate(agg.T @ dpre)
        grad = np.asarray(op.T @ (dpre @ w.value.T))
    return grad


def freeze(enc: GcnEncoder) -> GcnEncoder:
    enc.frozen = True
    for p in enc.layers:
        p.frozen = True
    return enc


def parameter_digest(enc: GcnEncoder) -> str:
    """SHA-256 over layer shapes, activation tags and little-endian parameter bytes."""
    h = hashlib.sha256()
    for p, kind in zip(enc.layers, enc.activations):
        h.update(f"{p.shape[0]}x{p.shape[1]}:{kind};".encode())
        h.update(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    return h.hexdigest()


def save_encoder(enc: GcnEncoder, path) -> None:
    save_checkpoint(path, enc.layers, {"kind": "gcn_encoder", "activations": enc.activations})


def load_encoder(path) -> GcnEncoder:
    values, meta = load_checkpoint(path)
    if meta.get("kind") != "gcn_encoder":
        raise ValueError(f"{path} is not an encoder checkpoint")
    layers = [Param(v, name) for v, name in zip(values, meta["names"])]
    return GcnEncoder(layers, list(meta["activations"]))
