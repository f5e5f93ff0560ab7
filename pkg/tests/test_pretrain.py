import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhprompt.encoder import GcnEncoder, encode, parameter_digest
from nhprompt.errors import DataError, InsufficientDataError, KernelUnsupportedError
from nhprompt.graph import GraphCollection, planted_homophily_graph
from nhprompt.numerics import AdamConfig, finite_difference_check, zero_grads
from nhprompt.pretrain import (
    HOMOPHILY,
    NON_HOMOPHILY,
    ContrastiveTask,
    PretrainConfig,
    SimilarityKernel,
    augment_edge_drop,
    build_dgi_task,
    build_graphcl_task,
    build_link_prediction_task,
    classify_sample,
    contrastive_loss_and_grad,
    count_homophily_samples,
    corrupt_features,
    encode_task,
    expected_homophily_samples,
    is_homophily_task,
    pretrain,
    standardized_contrastive_loss,
    task_loss_and_backward,
    verify_theorem1,
    verify_theorem2,
)

from conftest import make_graph, random_edges
import oracles


def one_anchor(emb_rows):
    g = make_graph(len(emb_rows), [(0, 1)])
    return ContrastiveTask.from_nodes(g, [0], [[1]], [[2]]), np.asarray(emb_rows, dtype=float)


# -------------------------------------------------------------------- loss

def test_equal_kernel_values_give_ln2():
    task, emb = one_anchor([[1, 0], [1, 1], [1, -1]])
    loss, p = standardized_contrastive_loss(emb, task)
    assert p[0] == pytest.approx(0.5) and loss == pytest.approx(math.log(2))


def test_hand_computed_probability():
    task, emb = one_anchor([[1, 0], [2, 0], [0, 3]])
    loss, p = standardized_contrastive_loss(emb, task, SimilarityKernel(tau=1.0))
    assert p[0] == pytest.approx(math.e / (math.e + 1), abs=1e-4)
    assert loss == pytest.approx(0.3133, abs=1e-4)


def test_ratio_invariance_under_duplication():
    g = make_graph(4, [(0, 1)])
    emb = np.random.default_rng(0).normal(size=(4, 3))
    a = ContrastiveTask.from_nodes(g, [0], [[1]], [[2]])
    b = ContrastiveTask.from_nodes(g, [0], [[1, 1]], [[2, 2]])
    assert standardized_contrastive_loss(emb, a)[0] == pytest.approx(standardized_contrastive_loss(emb, b)[0])


def test_raw_cosine_kernel_rejected():
    task, emb = one_anchor([[1, 0], [1, 1], [1, -1]])
    with pytest.raises(KernelUnsupportedError):
        standardized_contrastive_loss(emb, task, SimilarityKernel("raw-cosine"))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 2.0))
def test_loss_matches_reference_loop(seed, tau):
    rng = np.random.default_rng(seed)
    n = 7
    emb = rng.normal(size=(n, 3))
    g = make_graph(n, [])
    anchors = [0, 3, 5]
    pos = [rng.choice(n, int(rng.integers(1, 3))).tolist() for _ in anchors]
    neg = [rng.choice(n, int(rng.integers(1, 4))).tolist() for _ in anchors]
    task = ContrastiveTask.from_nodes(g, anchors, pos, neg)
    ref = oracles.contrastive_loss(emb.tolist(), anchors, pos, neg, tau)
    assert standardized_contrastive_loss(emb, task, SimilarityKernel(tau=tau))[0] == pytest.approx(ref, rel=1e-10)


def test_loss_gradient_sign():
    task, emb = one_anchor([[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]])
    _, grad = contrastive_loss_and_grad(emb, task)
    # moving the positive toward the anchor lowers the loss; same move on the negative raises it
    toward = np.array([1.0, 0.0]) - emb[1]
    assert grad[1] @ toward < 0
    toward_neg = np.array([1.0, 0.0]) - emb[2]
    assert grad[2] @ toward_neg > 0
    base = standardized_contrastive_loss(emb, task)[0]
    closer_pos = emb.copy()
    closer_pos[1] = [0.8, 0.6]
    assert standardized_contrastive_loss(closer_pos, task)[0] < base
    closer_neg = emb.copy()
    closer_neg[2] = [0.6, 0.8]
    assert standardized_contrastive_loss(closer_neg, task)[0] > base


@pytest.mark.parametrize("kind", ["link_prediction", "graphcl", "dgi"])
def test_encoder_gradient_under_each_task(kind):
    g = planted_homophily_graph(12, 2, 0.5, 2.5, seed=3)
    enc = GcnEncoder.create([2, 4, 3], seed=1, activation="tanh")
    task = {"link_prediction": lambda: build_link_prediction_task(g, 2, seed=0),
            "graphcl": lambda: build_graphcl_task(g, 0.2, seed=0, delta=1, batch_size=5),
            "dgi": lambda: build_dgi_task(g, seed=0)}[kind]()
    kernel = SimilarityKernel(tau=0.5)
    zero_grads(enc.params())
    task_loss_and_backward(enc, task, kernel)
    err = finite_difference_check(lambda: standardized_contrastive_loss(encode_task(enc, task), task, kernel)[0],
                                  enc.params())
    assert err < 1e-4


# ----------------------------------------------------------------- samples

def test_classify_sample_cases():
    g = make_graph(4, [(0, 1), (0, 2)])
    for ca, cb, expected in [(0.9, 0.1, HOMOPHILY), (0.3, 0.3, NON_HOMOPHILY), (0.2, 0.5, NON_HOMOPHILY)]:
        emb = np.zeros((4, 2))
        emb[0] = [1.0, 0.0]
        emb[1] = [ca, math.sqrt(1 - ca**2)]
        emb[3] = [cb, math.sqrt(1 - cb**2)]
        assert classify_sample(g, emb, 0, 1, 3) == expected
    with pytest.raises(DataError):
        classify_sample(g, np.eye(4), 0, 3, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_classification_invariant_to_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    g = make_graph(4, [(0, 1)])
    emb = rng.normal(size=(4, 3))
    plain = classify_sample(g, emb, 0, 1, 2)
    for f in (lambda c: math.exp(c / 0.3), lambda c: c**3 + 2 * c, lambda c: math.atan(5 * c)):
        sim = lambda a, b, f=f: f(oracles.cos(a.tolist(), b.tolist()))
        assert classify_sample(g, emb, 0, 1, 2, sim=sim) == plain


def test_expected_homophily_samples():
    g = make_graph(6, [(0, 1), (2, 3)])
    task = ContrastiveTask.from_nodes(g, [0, 2], [[1], [3]], [[4, 5], [5]])
    assert expected_homophily_samples(task, 1.0, 0.0) == 3
    single = ContrastiveTask.from_nodes(g, [0], [[1]], [[4]])
    assert expected_homophily_samples(single, 0.5, 0.5) == 0.25
    assert expected_homophily_samples(task, 0.0, 0.3) == 0


# ------------------------------------------------------------------- tasks

def test_link_prediction_infeasible_on_path():
    g = make_graph(3, [(0, 1), (1, 2)])
    with pytest.raises(InsufficientDataError):
        build_link_prediction_task(g, 1, seed=0, anchors=[1])


def test_link_prediction_deterministic_and_homophily():
    rng = np.random.default_rng(1)
    g = make_graph(10, random_edges(rng, 10, 0.2))
    a, b = build_link_prediction_task(g, 2, seed=4), build_link_prediction_task(g, 2, seed=4)
    assert a.anchors == b.anchors
    assert all(np.array_equal(x, y) for x, y in zip(a.positives, b.positives))
    assert all(np.array_equal(x, y) for x, y in zip(a.negatives, b.negatives))
    assert is_homophily_task(a, g)


def test_task_with_bad_positive_is_not_homophily():
    g = make_graph(4, [(0, 1), (2, 3)])
    assert is_homophily_task(ContrastiveTask.from_nodes(g, [0], [[1]], [[2]]), g)
    assert not is_homophily_task(ContrastiveTask.from_nodes(g, [0], [[1, 3]], [[2]]), g)


def test_edge_drop():
    g = make_graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 2), (1, 3), (2, 4), (3, 5)])
    assert augment_edge_drop(g, 0.0, seed=1).edges().tolist() == g.edges().tolist()
    dropped = augment_edge_drop(g, 0.2, seed=1)
    assert dropped.num_edges == 8
    assert dropped.edges().tolist() == augment_edge_drop(g, 0.2, seed=1).edges().tolist()
    assert set(map(tuple, dropped.edges().tolist())) <= set(map(tuple, g.edges().tolist()))


def test_graphcl_task_structure():
    coll = GraphCollection((make_graph(3, [(0, 1), (1, 2)]), make_graph(4, [(0, 1), (2, 3)])))
    task = build_graphcl_task(coll, 0.2, seed=0)
    assert all(len(p) == 1 for p in task.positives)
    assert all(len(n) >= 1 for n in task.negatives)
    assert not is_homophily_task(task, coll.graphs[0])


def test_unaugmented_view_pools_to_mean():
    g = make_graph(5, [(0, 1), (1, 2), (3, 4)], d=3)
    coll = GraphCollection((g, make_graph(2, [(0, 1)], d=3)))
    enc = GcnEncoder.create([3, 4], seed=0)
    task = build_graphcl_task(coll, 0.0, seed=0)
    pooled = encode_task(enc, task)
    assert np.allclose(pooled[0], encode(enc, g).mean(axis=0))


def test_dgi_task():
    g = planted_homophily_graph(20, 2, 0.5, 3, seed=0)
    corrupted, perm = corrupt_features(g, seed=5)
    assert not np.array_equal(corrupted.features, g.features)
    assert np.array_equal(perm, corrupt_features(g, seed=5)[1])
    assert not is_homophily_task(build_dgi_task(g, seed=5), g)


@pytest.mark.parametrize("seed", range(20))
def test_task_taxonomy_random_fixtures(seed):
    g = planted_homophily_graph(30, 3, 0.1 + 0.04 * seed, 3, seed)
    assert is_homophily_task(build_link_prediction_task(g, 2, seed), g)
    assert not is_homophily_task(build_graphcl_task(g, 0.2, seed, delta=1, batch_size=6), g)
    assert not is_homophily_task(build_dgi_task(g, seed), g)


# ----------------------------------------------------------------- training

def test_pretrain_lr_zero_constant_trace():
    g = planted_homophily_graph(30, 3, 0.5, 3, seed=0)
    enc = GcnEncoder.create([3, 8], seed=0)
    d0 = parameter_digest(enc)
    res = pretrain(enc, g, PretrainConfig(task="link_prediction", epochs=8, optimizer=AdamConfig(lr=0.0),
                                          resample=False))
    assert len(set(res.losses)) == 1
    assert parameter_digest(enc) == d0


def test_pretrain_reduces_loss_on_two_nodes():
    g = make_graph(3, [(0, 1)], d=2, seed=1)
    g = g.with_features(np.array([[1.0, 0.1], [0.9, 0.0], [0.0, 1.0]]))
    enc = GcnEncoder.create([2, 4], seed=0)
    res = pretrain(enc, g, PretrainConfig(task="link_prediction", epochs=100, optimizer=AdamConfig(lr=0.05),
                                          resample=False))
    assert res.best_losses[-1] < res.losses[0]


def test_pretrain_deterministic_digest():
    g = planted_homophily_graph(40, 3, 0.4, 3, seed=2)
    digests = []
    for _ in range(2):
        enc = GcnEncoder.create([3, 8], seed=39)
        pretrain(enc, g, PretrainConfig(task="graphcl", epochs=5, optimizer=AdamConfig(lr=0.01), batch_size=10))
        digests.append(parameter_digest(enc))
    assert digests[0] == digests[1]


# ---------------------------------------------------------------- harnesses

def test_theorem1_small_run():
    report = verify_theorem1(200, seed=3)
    assert report.trials == 200 and report.violations == 0
    assert report.skipped > 0
    assert all(r["loss_homophily"] < r["loss_non_homophily"] for r in report.records)


def test_theorem1_rejects_zero_trials():
    with pytest.raises(ValueError):
        verify_theorem1(0)


def test_theorem2_three_points():
    report = verify_theorem2([0.1, 0.5, 0.9], seeds=10)
    assert report.statistic == pytest.approx(1.0)
    means = [report.means[h] for h in (0.1, 0.5, 0.9)]
    assert means[0] < means[1] < means[2]


def test_theorem2_single_point_has_no_statistic():
    assert verify_theorem2([0.5], seeds=2).statistic is None


def test_full_homophily_cross_label_triplets_all_count():
    g = planted_homophily_graph(60, 3, 1.0, 4, seed=1)
    task = build_link_prediction_task(g, 4, seed=1)
    emb = g.features
    cross = sum(int(g.labels[task.instances[x].members[0]] != g.labels[a])
                for a, neg in zip(task.anchors, task.negatives) for x in neg)
    same = task.triplet_count() - cross
    count = count_homophily_samples(g, emb, task)
    # every cross-label negative yields a homophily sample; same-label ones are decided by noise
    assert cross <= count <= cross + same
    assert verify_theorem2([1.0], seeds=2, negatives=3).records[0]["consistent"]


def test_theorem_csv(tmp_path):
    report = verify_theorem2([0.2, 0.8], seeds=2)
    report.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "trial,h,count,violation" and len(lines) == 5
