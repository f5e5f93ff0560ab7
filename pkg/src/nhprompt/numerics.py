"""Small deterministic numeric kernel.

Dense matrices are plain ``float64`` numpy arrays; sparse operators are
``scipy.sparse`` CSR matrices. On top of that sit a parameter container,
a two-layer bottleneck MLP with hand-written gradients, an Adam optimizer,
a central finite-difference gradient checker and a binary checkpoint format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, FreezeViolationError, NumericalError, ShapeError

DEFAULT_SEED = 39

ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")


def check_finite(x, what="value"):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite entries in {what}")
    return x


def as_matrix(x, what="matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"{what} must be 2-D, got shape {a.shape}")
    return check_finite(a, what)


# ---------------------------------------------------------------------------
# products and similarity


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a, "left operand"), as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjacency_operator(g) -> sp.csr_matrix:
    """Unit-weight CSR adjacency of a :class:`~nhprompt.graph.Graph` (no self-loops)."""
    data = np.ones(len(g.col_indices))
    return sp.csr_matrix((data, g.col_indices, g.row_offsets), shape=(g.num_nodes, g.num_nodes))


def spmm(op, x) -> np.ndarray:
    """Sparse-dense product ``op @ x``.

    ``op`` may be a scipy sparse matrix or a graph, in which case its
    unit-weight adjacency is used.
    """
    if not sp.issparse(op):
        op = adjacency_operator(op)
    x = as_matrix(x, "dense operand")
    if op.shape[1] != x.shape[0]:
        raise ShapeError(f"operator has {op.shape[1]} columns, dense operand has {x.shape[0]} rows")
    return np.asarray(op @ x)


def cosine_similarity(a, b) -> float:
    """Cosine of two vectors; 0 when either has zero norm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def row_norms(x) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def safe_normalize(x) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize ``x``; zero rows stay zero. Returns ``(unit_rows, norms)``."""
    norms = row_norms(x)
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return x * inv[:, None], norms


def paired_cosine(x, y):
    """Cosines of corresponding rows of ``x`` and ``y`` plus a backward closure.

    The closure maps upstream gradients on the cosines to gradients on
    ``x`` and ``y``. Rows with zero norm get cosine 0 and zero gradient.
    """
    xu, nx = safe_normalize(x)
    yu, ny = safe_normalize(y)
    cos = np.einsum("ij,ij->i", xu, yu)

    def backward(dcos):
        inv_x = np.divide(1.0, nx, out=np.zeros_like(nx), where=nx > 0)
        inv_y = np.divide(1.0, ny, out=np.zeros_like(ny), where=ny > 0)
        dx = (dcos * inv_x)[:, None] * (yu - cos[:, None] * xu)
        dy = (dcos * inv_y)[:, None] * (xu - cos[:, None] * yu)
        return dx, dy

    return cos, backward


def cosine_matrix(x, y):
    """All-pairs cosine ``C[i, j] = cos(x_i, y_j)`` plus a backward closure."""
    xu, nx = safe_normalize(x)
    yu, ny = safe_normalize(y)
    cos = xu @ yu.T

    def backward(dcos):
        inv_x = np.divide(1.0, nx, out=np.zeros_like(nx), where=nx > 0)
        inv_y = np.divide(1.0, ny, out=np.zeros_like(ny), where=ny > 0)
        dx = inv_x[:, None] * (dcos @ yu - np.sum(dcos * cos, axis=1)[:, None] * xu)
        dy = inv_y[:, None] * (dcos.T @ xu - np.sum(dcos * cos, axis=0)[:, None] * yu)
        return dx, dy

    return cos, backward


# ---------------------------------------------------------------------------
# activations


def activate(x, kind: str) -> np.ndarray:
    if kind == "linear":
        return x
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * x))  # overflow-free logistic
    if kind == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def activate_grad(pre, out, kind: str) -> np.ndarray:
    """Derivative of the activation evaluated at ``pre`` (``out = act(pre)``)."""
    if kind == "linear":
        return np.ones_like(pre)
    if kind == "relu":
        return (pre > 0).astype(np.float64)  # subgradient 0 at 0
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "tanh":
        return 1.0 - out * out
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# parameters


@dataclass(eq=False)
class Param:
    """A trainable matrix with its gradient and Adam moments."""

    value: np.ndarray
    name: str = ""
    grad: np.ndarray = field(default=None, repr=False)
    moment1: np.ndarray = field(default=None, repr=False)
    moment2: np.ndarray = field(default=None, repr=False)
    frozen: bool = False

    def __post_init__(self):
        self.value = as_matrix(self.value, self.name or "param").copy()
        shape = self.value.shape
        self.grad = np.zeros(shape) if self.grad is None else np.asarray(self.grad, dtype=np.float64)
        self.moment1 = np.zeros(shape) if self.moment1 is None else self.moment1
        self.moment2 = np.zeros(shape) if self.moment2 is None else self.moment2
        if not (self.grad.shape == self.moment1.shape == self.moment2.shape == shape):
            raise ShapeError("param value, grad and moments must share a shape")

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self):
        self.grad[...] = 0.0

    def accumulate(self, g):
        if self.frozen:
            raise FreezeViolationError(f"cannot accumulate gradient into frozen param {self.name!r}")
        self.grad += g


def glorot_uniform(fan_in: int, fan_out: int, rng) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def zero_grads(params: Sequence[Param]):
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# MLP


@dataclass(eq=False)
class Mlp:
    """Two-layer perceptron ``out_act(act(x W1 + b1) W2 + b2)``."""

    w1: Param
    b1: Param
    w2: Param
    b2: Param
    activation: str = "sigmoid"
    output_activation: str = "linear"

    def __post_init__(self):
        for kind in (self.activation, self.output_activation):
            if kind not in ACTIVATIONS:
                raise ValueError(f"unknown activation {kind!r}")
        d_in, m = self.w1.shape
        if self.b1.shape != (1, m) or self.w2.shape[0] != m or self.b2.shape != (1, self.w2.shape[1]):
            raise ShapeError("inconsistent MLP parameter shapes")

    @classmethod
    def create(cls, d_in, hidden, d_out, seed=DEFAULT_SEED, activation="sigmoid", output_activation="linear"):
        rng = np.random.default_rng(seed)
        return cls(
            Param(glorot_uniform(d_in, hidden, rng), "w1"),
            Param(np.zeros((1, hidden)), "b1"),
            Param(glorot_uniform(hidden, d_out, rng), "w2"),
            Param(np.zeros((1, d_out)), "b2"),
            activation,
            output_activation,
        )

    @property
    def d_in(self):
        return self.w1.shape[0]

    @property
    def hidden(self):
        return self.w1.shape[1]

    @property
    def d_out(self):
        return self.w2.shape[1]

    def params(self) -> list[Param]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "Mlp":
        return Mlp(*(Param(p.value, p.name) for p in self.params()), self.activation, self.output_activation)


def _mlp_pass(mlp: Mlp, x):
    x = as_matrix(x, "MLP input")
    if x.shape[1] != mlp.d_in:
        raise ShapeError(f"MLP expects {mlp.d_in} input columns, got {x.shape[1]}")
    pre1 = x @ mlp.w1.value + mlp.b1.value
    hid = activate(pre1, mlp.activation)
    pre2 = hid @ mlp.w2.value + mlp.b2.value
    out = activate(pre2, mlp.output_activation)
    return x, pre1, hid, pre2, out


def mlp_forward(mlp: Mlp, x) -> np.ndarray:
    return _mlp_pass(mlp, x)[-1]


def mlp_backward(mlp: Mlp, x, upstream) -> np.ndarray:
    """Accumulate parameter gradients for ``sum(upstream * mlp_forward(x))``.

    Returns the gradient with respect to ``x``. The forward pass is
    recomputed from ``x`` so no state is carried between calls.
    """
    x, pre1, hid, pre2, out = _mlp_pass(mlp, x)
    g = as_matrix(upstream, "upstream gradient")
    if g.shape != out.shape:
        raise ShapeError(f"upstream gradient shape {g.shape} != output shape {out.shape}")
    d2 = g * activate_grad(pre2, out, mlp.output_activation)
    mlp.w2.accumulate(hid.T @ d2)
    mlp.b2.accumulate(d2.sum(axis=0, keepdims=True))
    d1 = (d2 @ mlp.w2.value.T) * activate_grad(pre1, hid, mlp.activation)
    mlp.w1.accumulate(x.T @ d1)
    mlp.b1.accumulate(d1.sum(axis=0, keepdims=True))
    return d1 @ mlp.w1.value.T


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: Sequence[Param], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, step_index=1):
    """One bias-corrected Adam update, in place, in list order."""
    if step_index < 1:
        raise ValueError("step_index must be >= 1")
    for p in params:
        if p.frozen:
            raise FreezeViolationError(f"optimizer step on frozen param {p.name!r}")
        check_finite(p.grad, f"gradient of {p.name or 'param'}")
    c1 = 1.0 - beta1**step_index
    c2 = 1.0 - beta2**step_index
    for p in params:
        p.moment1 = beta1 * p.moment1 + (1.0 - beta1) * p.grad
        p.moment2 = beta2 * p.moment2 + (1.0 - beta2) * p.grad * p.grad
        if lr == 0.0:
            continue
        mhat = p.moment1 / c1
        vhat = p.moment2 / c2
        p.value = p.value - lr * mhat / (np.sqrt(vhat) + eps)
    return params


class Adam:
    """Stateful wrapper that owns a parameter list and its step counter."""

    def __init__(self, params: Sequence[Param], config: AdamConfig | None = None):
        self.params = list(params)
        self.config = config or AdamConfig()
        self.steps = 0
        for p in self.params:
            if p.frozen:
                raise FreezeViolationError(f"optimizer given frozen param {p.name!r}")

    def zero_grad(self):
        zero_grads(self.params)

    def step(self):
        self.steps += 1
        c = self.config
        adam_step(self.params, c.lr, c.beta1, c.beta2, c.eps, self.steps)


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference_check(f: Callable[[], float], params: Sequence[Param], h: float = 1e-5,
                            floor: float = 1e-6) -> float:
    """Maximum relative error between analytic and central-difference gradients.

    ``f`` evaluates the scalar objective at the params' current values; the
    analytic gradients must already sit in ``p.grad``. The relative error for
    each entry is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        analytic = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericalError("objective is non-finite at a perturbed point")
            numeric = (fp - fm) / (2.0 * h)
            denom = max(abs(analytic[i]), abs(numeric), floor)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"NHPCKPT\x00"
_VERSION = 1


def save_checkpoint(path, params: Sequence[Param], meta: dict | None = None) -> None:
    """Write params as: magic, version, JSON meta, then per param rows/cols + float64 payload."""
    meta = dict(meta or {})
    meta["shapes"] = [list(p.shape) for p in params]
    meta["names"] = [p.name for p in params]
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(params)))
        for p in params:
            fh.write(struct.pack("<QQ", *p.shape))
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[list[np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    version, mlen = struct.unpack_from("<II", raw, 8)
    if version != _VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    meta = json.loads(raw[pos : pos + mlen].decode("utf-8"))
    pos += mlen
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    values = []
    for _ in range(count):
        rows, cols = struct.unpack_from("<QQ", raw, pos)
        pos += 16
        nbytes = rows * cols * 8
        values.append(np.frombuffer(raw[pos : pos + nbytes], dtype="<f8").reshape(rows, cols).astype(np.float64))
        pos += nbytes
    if pos != len(raw):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return values, meta
