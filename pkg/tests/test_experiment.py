import csv
import dataclasses
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhprompt.encoder import GcnEncoder, freeze
from nhprompt.errors import ConfigError, DataError
from nhprompt.experiment import (
    VARIANTS,
    BucketRow,
    EvalReport,
    ExperimentConfig,
    RunRecord,
    bucket_accuracy,
    count_tunable_parameters,
    dump_config,
    emit_report,
    format_report,
    load_source,
    parse_config,
    prepare_prompt_data,
    queries_per_class,
    read_report,
    run_pipeline,
    run_tasks,
    run_variant,
)
from nhprompt.graph import planted_homophily_graph

from conftest import make_graph

SMALL = dict(planted_nodes=60, planted_degree=2.0, shots=2, num_tasks=3, seeds=2, pretrain_epochs=5,
             tune_epochs=15, encoder_dims="8", cond_hidden=4, pretrain_batch=16)


@pytest.fixture(scope="module")
def small_cfg():
    return ExperimentConfig(**SMALL)


@pytest.fixture(scope="module")
def frozen_encoder():
    return freeze(GcnEncoder.create([3, 8], seed=39))


# ------------------------------------------------------------------ config

def test_parse_config_with_comments():
    cfg = parse_config("# experiment\nshots = 5   # k\nvariant = no_sim\n\ntau=0.25\nencoder_dims = 32, 16\n")
    assert cfg.shots == 5 and cfg.variant == "no_sim" and cfg.tau == 0.25
    assert cfg.hidden_dims() == [32, 16]


@pytest.mark.parametrize("text", ["bogus = 1\n", "shots 5\n", "shots = five\n", "shots = 1\nshots = 2\n",
                                  "variant = fancy\n", "shots = 0\n", "tau = -1\n", "task_kind = edge\n"])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_every_field_round_trips():
    cfg = ExperimentConfig(shots=3, variant="node_cond", tau=0.3, encoder_dims="16 8", output="x.csv")
    assert parse_config(dump_config(cfg)) == cfg
    addressed = {line.split("=")[0].strip() for line in dump_config(cfg).splitlines()}
    assert addressed == {f.name for f in dataclasses.fields(ExperimentConfig)}


def test_default_protocol_sizes():
    cfg = ExperimentConfig()
    assert (cfg.num_tasks, cfg.seeds, cfg.queries, cfg.delta, cfg.tau, cfg.cond_hidden, cfg.seed) == \
        (100, 5, 10, 2, 0.5, 64, 39)


def test_queries_capped_by_class_size():
    labels = np.array([0] * 4 + [1] * 30)
    assert queries_per_class(ExperimentConfig(shots=1), labels) == 3
    assert queries_per_class(ExperimentConfig(shots=1), np.array([0] * 40 + [1] * 40)) == 10
    with pytest.raises(DataError):
        queries_per_class(ExperimentConfig(shots=4), labels)


# ---------------------------------------------------------------- pipeline

def test_single_run(small_cfg, frozen_encoder):
    cfg = dataclasses.replace(small_cfg, num_tasks=1, seeds=1)
    report = run_pipeline(cfg, frozen_encoder)
    assert len(report.runs) == 1
    assert report.std == 0.0 and report.mean == 100 * report.runs[0].accuracy


def test_pipeline_is_deterministic(small_cfg):
    a, b = run_pipeline(small_cfg), run_pipeline(small_cfg)
    assert a.same_results(b)
    assert len(a.runs) == small_cfg.num_tasks * small_cfg.seeds
    assert all(0.0 <= r.accuracy <= 1.0 for r in a.runs)


def test_run_order_does_not_matter(small_cfg, frozen_encoder):
    g = load_source(small_cfg)
    prepared = prepare_prompt_data(frozen_encoder, g, small_cfg.delta, "weighted")
    pairs = [(t, r) for t in range(3) for r in range(2)]
    forward = run_tasks(small_cfg, prepared, g.labels, 8, 5, pairs)
    backward = run_tasks(small_cfg, prepared, g.labels, 8, 5, pairs[::-1])[::-1]
    assert [o[0] for o in forward] == [o[0] for o in backward]


def test_std_is_population_std(small_cfg, frozen_encoder, tmp_path):
    report = run_pipeline(small_cfg, frozen_encoder)
    emit_report(report, tmp_path / "r.csv")
    # independent pass over the emitted CSV
    text = (tmp_path / "r.csv").read_text()
    runs = text.split("[runs]\n", 1)[1].split("[buckets]", 1)[0]
    acc = [float(row["accuracy"]) for row in csv.DictReader(io.StringIO(runs))]
    mean = sum(acc) / len(acc)
    pop = (sum((a - mean) ** 2 for a in acc) / len(acc)) ** 0.5
    assert report.std == pytest.approx(100 * pop, abs=1e-9)
    assert report.mean == pytest.approx(100 * mean, abs=1e-9)


@pytest.mark.parametrize("variant", VARIANTS)
def test_each_variant_runs(small_cfg, frozen_encoder, variant):
    report = run_variant(dataclasses.replace(small_cfg, num_tasks=1, seeds=1), variant, frozen_encoder)
    assert report.variant == variant
    assert report.tunable_parameters == count_tunable_parameters(variant, 8, small_cfg.cond_hidden)


def test_no_prompt_and_untrained_single_prompt_agree(small_cfg, frozen_encoder):
    cfg = dataclasses.replace(small_cfg, tune_lr=0.0)
    a = run_variant(cfg, "no_prompt", frozen_encoder)
    b = run_variant(cfg, "single_prompt", frozen_encoder)
    assert [r.correct for r in a.runs] == [r.correct for r in b.runs]


def test_graph_task_pipeline(frozen_encoder):
    cfg = ExperimentConfig(**{**SMALL, "task_kind": "graph", "ego_delta": 1})
    report = run_pipeline(cfg, frozen_encoder)
    assert len(report.runs) == 6 and report.buckets == []


def test_unfrozen_encoder_rejected(small_cfg):
    from nhprompt.errors import FreezeViolationError
    with pytest.raises(FreezeViolationError):
        run_pipeline(small_cfg, GcnEncoder.create([3, 8]))


# -------------------------------------------------------- parameter counts

def test_parameter_counts():
    assert count_tunable_parameters("pronog", 256, 64) == 33088
    assert count_tunable_parameters("pronog", 256, 64, include_bias=False) == 32768
    assert count_tunable_parameters("single_prompt", 256) == 256
    assert count_tunable_parameters("no_prompt", 256) == 0
    with pytest.raises(ConfigError):
        count_tunable_parameters("mystery", 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(1, 64))
def test_parameter_count_matches_condition_net(d, m):
    from nhprompt.prompt import ConditionNet
    if not (m < d or m <= 64):
        return
    cn = ConditionNet.create(d, m, seed=0)
    assert count_tunable_parameters("pronog", d, m) == cn.num_parameters()
    assert count_tunable_parameters("pronog", d, m, False) == cn.num_parameters(include_bias=False)


# ------------------------------------------------------------------ buckets

def test_bucket_all_in_top_bucket():
    g = make_graph(4, [(0, 1), (2, 3)], labels=[0, 0, 1, 1])
    rows = bucket_accuracy([0, 1, 2, 3], [True] * 4, g)
    by = {r.bucket: r for r in rows}
    assert by[4].accuracy == 1.0 and by[4].total == 4
    assert all(by[b].total == 0 and by[b].accuracy is None for b in (0, 1, 2, 3, -1))


def test_bucket_hand_tally():
    g = make_graph(5, [(0, 1), (0, 2), (0, 3)], labels=[0, 0, 1, 1, 1])
    # H(0)=1/3 -> 1, H(1)=1 -> 4, H(2)=0 -> 0, H(3)=0 -> 0, node 4 isolated
    rows = {r.bucket: (r.correct, r.total) for r in bucket_accuracy([0, 1, 2, 3, 4, 0], [1, 1, 0, 1, 1, 0], g)}
    assert rows == {0: (1, 2), 1: (1, 2), 2: (0, 0), 3: (0, 0), 4: (1, 1), -1: (1, 1)}


def test_bucket_requires_node_task():
    with pytest.raises(DataError, match="bucket analysis requires node task"):
        bucket_accuracy([0], [True], make_graph(2, [(0, 1)], labels=[0, 0]), task_kind="graph")


# ------------------------------------------------------------------ reports

def _report(n_runs, buckets=()):
    rng = np.random.default_rng(n_runs)
    runs = [RunRecord(i // 5, i % 5, c / 30, int(c), 30) for i, c in enumerate(rng.integers(0, 31, n_runs))]
    return EvalReport.from_runs("pronog", runs, buckets=list(buckets), tunable_parameters=33088,
                                tunable_parameters_no_bias=32768, timings={"tune": 1.5})


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_report_round_trip(tmp_path, fmt):
    rep = _report(12, [BucketRow(0, 3, 4), BucketRow(-1, 0, 0)])
    path = tmp_path / f"r.{fmt}"
    emit_report(rep, path)
    back = read_report(path)
    assert back == rep


def test_empty_bucket_section_is_header_only():
    text = format_report(_report(3), "csv")
    section = text.split("[buckets]\n", 1)[1].split("[timings]", 1)[0]
    assert section.splitlines() == ["bucket,correct,total,accuracy"]


def test_five_hundred_rows():
    text = format_report(_report(500), "csv")
    runs = text.split("[runs]\n", 1)[1].split("[buckets]", 1)[0].splitlines()
    summary = text.split("[summary]\n", 1)[1].split("[runs]", 1)[0].splitlines()
    assert len(runs) - 1 == 500 and len(summary) - 1 == 1
    assert json.loads(format_report(_report(500), "json"))["summary"]["runs"] == 500


def test_report_field_order_is_deterministic():
    assert format_report(_report(5), "csv") == format_report(_report(5), "csv")
    keys = list(json.loads(format_report(_report(5), "json")))
    assert keys == ["summary", "runs", "buckets", "timings"]


def test_planted_source_matches_generator():
    cfg = ExperimentConfig(planted_nodes=30, planted_degree=3.0, planted_seed=4)
    g = load_source(cfg)
    ref = planted_homophily_graph(30, 3, 0.3, 3.0, 4)
    assert np.array_equal(g.col_indices, ref.col_indices)
