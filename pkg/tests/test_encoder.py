import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhprompt.encoder import (
    GcnEncoder,
    encode,
    encode_backward,
    freeze,
    load_encoder,
    normalize_adjacency,
    parameter_digest,
    save_encoder,
)
from nhprompt.errors import FreezeViolationError, ShapeError
from nhprompt.graph import Graph
from nhprompt.numerics import Adam, AdamConfig, Param, adam_step, finite_difference_check, zero_grads

from conftest import make_graph, random_edges
import oracles


def test_normalize_adjacency_cases():
    assert normalize_adjacency(make_graph(1, [])).toarray().tolist() == [[1.0]]
    two = normalize_adjacency(make_graph(2, [(0, 1)])).toarray()
    assert np.allclose(two, 0.5)
    tri = normalize_adjacency(make_graph(3, [(0, 1), (1, 2), (0, 2)])).toarray()
    assert np.allclose(tri, 1 / 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 15))
    edges = random_edges(rng, n, 0.3)
    op = normalize_adjacency(make_graph(n, edges)).toarray()
    assert np.allclose(op, oracles.dense_gcn_operator(n, edges.tolist()), atol=1e-14)
    assert np.allclose(op, op.T)
    assert np.max(np.abs(np.linalg.eigvalsh(op))) <= 1 + 1e-12


def test_row_sums_can_exceed_one():
    # symmetric normalization is a contraction spectrally, not row-wise
    star = normalize_adjacency(make_graph(5, [(0, i) for i in range(1, 5)])).toarray()
    assert star[0].sum() == pytest.approx(1 / 5 + 4 / np.sqrt(10))


def test_encode_zero_layers_is_identity():
    g = make_graph(3, [(0, 1)])
    assert np.array_equal(encode(GcnEncoder([], []), g), g.features)


def test_encode_isolated_node_identity_weights():
    g = make_graph(2, [], d=2)
    enc = GcnEncoder([Param(np.eye(2))], ["relu"])
    assert np.array_equal(encode(enc, g), np.maximum(g.features, 0))


def test_encode_two_node_hand_computed():
    g = Graph.from_edges(2, [(0, 1)], np.array([[1.0, 2.0], [3.0, -1.0]]))
    w = np.array([[1.0, 0.5, 0.0], [-1.0, 2.0, 1.0]])
    enc = GcnEncoder([Param(w)], ["linear"])
    # every entry of the operator is 0.5, so both rows equal 0.5 * (x0 + x1) @ w
    expected = np.tile(0.5 * np.array([4.0, 1.0]) @ w, (2, 1))
    assert np.allclose(encode(enc, g), expected)


def test_encode_backward_linear_identity():
    rng = np.random.default_rng(0)
    g = make_graph(5, [(0, 1), (1, 2), (3, 4)], d=3)
    enc = GcnEncoder.create([3, 4], seed=0)
    up = rng.normal(size=(5, 4))
    encode_backward(enc, g, up)
    ax = oracles.dense_gcn_operator(5, [(0, 1), (1, 2), (3, 4)]) @ g.features
    assert np.allclose(enc.layers[0].grad, ax.T @ up)
    zero_grads(enc.params())
    encode_backward(enc, g, np.zeros((5, 4)))
    assert np.all(enc.layers[0].grad == 0)


@pytest.mark.parametrize("seed", range(5))
def test_encode_backward_two_layer_fd(seed):
    rng = np.random.default_rng(seed)
    n = 8
    g = make_graph(n, random_edges(rng, n, 0.35), d=3, seed=seed)
    enc = GcnEncoder.create([3, 5, 2], seed=seed, activation="tanh")
    w = rng.normal(size=(n, 2))
    dx = encode_backward(enc, g, w)
    assert finite_difference_check(lambda: float(np.sum(w * encode(enc, g))), enc.params()) < 1e-4
    xp = Param(g.features)
    xp.grad = dx
    assert finite_difference_check(lambda: float(np.sum(w * encode(enc, g.with_features(xp.value)))), [xp]) < 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_encode_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    edges = random_edges(rng, n, 0.3)
    g = make_graph(n, edges, d=3, seed=seed)
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    g2 = Graph.from_edges(n, inv[edges] if len(edges) else edges, g.features[perm])
    enc = GcnEncoder.create([3, 4, 2], seed=seed)
    assert np.allclose(encode(enc, g)[perm], encode(enc, g2), atol=1e-12)


def test_no_edges_is_per_node():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 3))
    enc = GcnEncoder.create([3, 6, 2], seed=1)
    full = encode(enc, Graph.from_edges(4, np.zeros((0, 2), dtype=int), x))
    for v in range(4):
        single = encode(enc, Graph.from_edges(1, np.zeros((0, 2), dtype=int), x[v:v + 1]))
        assert np.allclose(full[v], single[0])


def test_shape_mismatch():
    enc = GcnEncoder.create([5, 2])
    with pytest.raises(ShapeError):
        encode(enc, make_graph(2, [(0, 1)], d=3))


def test_freeze_contract():
    enc = GcnEncoder.create([2, 3])
    g = make_graph(3, [(0, 1)])
    d0 = parameter_digest(enc)
    encode_backward(enc, g, np.ones((3, 3)))
    Adam(enc.params(), AdamConfig(lr=0.01)).step()
    assert parameter_digest(enc) != d0
    freeze(enc)
    d1 = parameter_digest(enc)
    with pytest.raises(FreezeViolationError):
        encode_backward(enc, g, np.ones((3, 3)))
    with pytest.raises(FreezeViolationError):
        adam_step(enc.params())
    encode(enc, g)
    assert parameter_digest(enc) == d1


def test_digest_depends_only_on_seed():
    assert parameter_digest(GcnEncoder.create([3, 4], seed=7)) == parameter_digest(GcnEncoder.create([3, 4], seed=7))
    assert parameter_digest(GcnEncoder.create([3, 4], seed=7)) != parameter_digest(GcnEncoder.create([3, 4], seed=8))


def test_encoder_checkpoint_roundtrip(tmp_path):
    enc = GcnEncoder.create([3, 5, 2], seed=2)
    save_encoder(enc, tmp_path / "e.ckpt")
    back = load_encoder(tmp_path / "e.ckpt")
    assert parameter_digest(back) == parameter_digest(enc)
    assert back.activations == enc.activations
