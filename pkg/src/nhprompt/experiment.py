"""Experiment orchestration: configs, the k-shot evaluation protocol, ablation
variants, homophily-bucket analysis, parameter counts and report files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import GcnEncoder, freeze, load_encoder
from .errors import ConfigError, DataError, FreezeViolationError
from .graph import (
    ISOLATED,
    NUM_BUCKETS,
    Graph,
    build_ego_dataset,
    homophily_buckets,
    instance_labels,
    load_collection,
    load_graph,
    planted_homophily_graph,
    sample_kshot_task,
)
from .numerics import AdamConfig
from .pretrain import TASK_KINDS, PretrainConfig, pretrain
from .prompt import (
    ConditionalPrompt,
    ConditionNet,
    IdentityPrompt,
    SharedPrompt,
    TuneConfig,
    evaluate_task,
    fit_prompt,
    prepare_prompt_data,
)

VARIANTS = ("pronog", "no_prompt", "single_prompt", "node_cond", "no_sim")
_CONDITION = {"pronog": "weighted", "no_sim": "mean", "node_cond": "node",
              "single_prompt": "node", "no_prompt": "node"}


@dataclass
class ExperimentConfig:
    """Every field is addressable from a ``key = value`` config file.

    ``dataset`` is a canonical graph file, a collection directory, or the
    literal ``planted`` to generate a graph from the ``planted_*`` fields.
    """

    dataset: str = "planted"
    task_kind: str = "node"
    pretrain_task: str = "graphcl"
    shots: int = 1
    queries: int = 10
    num_tasks: int = 100
    seeds: int = 5
    encoder_dims: str = "64"
    encoder_activation: str = "relu"
    cond_hidden: int = 64
    delta: int = 2
    ego_delta: int = 2
    tau: float = 0.5
    pretrain_tau: float = 0.5
    pretrain_lr: float = 1e-3
    tune_lr: float = 1e-3
    pretrain_epochs: int = 2000
    tune_epochs: int = 2000
    patience: int = 50
    edge_drop: float = 0.2
    negatives: int = 1
    pretrain_batch: int = 0
    variant: str = "pronog"
    seed: int = 39
    planted_nodes: int = 300
    planted_classes: int = 3
    planted_homophily: float = 0.3
    planted_degree: float = 2.0
    planted_seed: int = 0
    checkpoint: str = ""
    output: str = ""

    def __post_init__(self):
        if self.task_kind not in ("node", "graph"):
            raise ConfigError(f"task_kind must be node or graph, got {self.task_kind!r}")
        if self.pretrain_task not in TASK_KINDS:
            raise ConfigError(f"pretrain_task must be one of {TASK_KINDS}, got {self.pretrain_task!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        for name in ("shots", "queries", "num_tasks", "seeds", "cond_hidden", "pretrain_epochs", "tune_epochs",
                     "patience", "negatives", "planted_nodes", "planted_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("tau", "pretrain_tau", "planted_degree"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("pretrain_lr", "tune_lr", "delta", "ego_delta", "pretrain_batch"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 <= self.edge_drop < 1:
            raise ConfigError("edge_drop must lie in [0, 1)")
        if not 0 <= self.planted_homophily <= 1:
            raise ConfigError("planted_homophily must lie in [0, 1]")
        self.hidden_dims()

    def hidden_dims(self) -> list[int]:
        try:
            dims = [int(x) for x in str(self.encoder_dims).replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"encoder_dims must be integers, got {self.encoder_dims!r}") from None
        if not dims or any(d < 1 for d in dims):
            raise ConfigError("encoder_dims needs at least one positive width")
        return dims

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(task=self.pretrain_task, epochs=self.pretrain_epochs, patience=self.patience,
                              optimizer=AdamConfig(lr=self.pretrain_lr), tau=self.pretrain_tau,
                              negatives=self.negatives, edge_drop=self.edge_drop, delta=self.delta,
                              batch_size=self.pretrain_batch or None, seed=self.seed)

    def tune_config(self, seed: int) -> TuneConfig:
        return TuneConfig(delta=self.delta, tau=self.tau, epochs=self.tune_epochs, patience=self.patience,
                          optimizer=AdamConfig(lr=self.tune_lr), seed=seed)


def _coerce(f: dataclasses.Field, raw: str):
    kind = f.type if isinstance(f.type, type) else {"int": int, "float": float, "str": str}[f.type]
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r} as {kind.__name__}") from None


def config_from_dict(values: dict) -> ExperimentConfig:
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**{k: _coerce(fields[k], str(v)) for k, v in values.items()})


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return config_from_dict(values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in dataclasses.fields(cfg))


# ---------------------------------------------------------------------------
# data and encoder


def load_source(cfg: ExperimentConfig):
    """The dataset as stored: a planted or loaded Graph, or a GraphCollection."""
    if cfg.dataset == "planted":
        return planted_homophily_graph(cfg.planted_nodes, cfg.planted_classes, cfg.planted_homophily,
                                       cfg.planted_degree, cfg.planted_seed)
    path = Path(cfg.dataset)
    if path.is_dir():
        return load_collection(path)
    if not path.exists():
        raise DataError(f"dataset {path} does not exist")
    return load_graph(path)


def task_data(cfg: ExperimentConfig, source):
    """The instances a task samples from: the graph for node tasks, graphs otherwise."""
    if cfg.task_kind == "node":
        if not isinstance(source, Graph):
            raise DataError("node classification needs a single graph dataset")
        return source
    if isinstance(source, Graph):
        return build_ego_dataset(source, cfg.ego_delta)
    return source


def build_encoder(cfg: ExperimentConfig, source) -> tuple[GcnEncoder, dict]:
    """Load the checkpoint if configured and present, else pre-train. Returned frozen."""
    if cfg.checkpoint and Path(cfg.checkpoint).exists():
        return freeze(load_encoder(cfg.checkpoint)), {"source": "checkpoint"}
    d_in = source.feature_dim if isinstance(source, Graph) else source.graphs[0].feature_dim
    enc = GcnEncoder.create([d_in, *cfg.hidden_dims()], seed=cfg.seed, activation=cfg.encoder_activation)
    result = pretrain(enc, source, cfg.pretrain_config())
    return freeze(enc), {"source": "pretrain", "epochs": len(result.losses),
                         "first_loss": result.losses[0], "best_loss": result.best_losses[-1]}


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def queries_per_class(cfg: ExperimentConfig, labels) -> int:
    """``min(cfg.queries, smallest class size - shots)``; at least one query is required."""
    labels = np.asarray(labels)
    counts = np.bincount(labels[labels >= 0])
    counts = counts[counts > 0]
    q = min(cfg.queries, int(counts.min()) - cfg.shots) if len(counts) else 0
    if q < 1:
        raise DataError(f"not enough labeled instances for {cfg.shots}-shot tasks with queries")
    return q


def make_prompt_model(variant: str, dim: int, hidden: int, seed: int, prepared):
    if variant == "no_prompt":
        return IdentityPrompt(dim)
    if variant == "single_prompt":
        return SharedPrompt(dim)
    if variant in ("pronog", "no_sim", "node_cond"):
        return ConditionalPrompt(ConditionNet.create(dim, hidden, seed), prepared.conditions)
    raise ConfigError(f"unknown variant {variant!r}")


def count_tunable_parameters(variant: str, d: int, m: int = 64, include_bias: bool = True) -> int:
    """Parameters updated during downstream adaptation for a variant."""
    if variant in ("pronog", "no_sim", "node_cond"):
        return 2 * d * m + ((m + d) if include_bias else 0)
    if variant == "single_prompt":
        return d
    if variant == "no_prompt":
        return 0
    raise ConfigError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# reports


@dataclass
class RunRecord:
    task_index: int
    repeat: int
    accuracy: float
    correct: int
    total: int


@dataclass
class BucketRow:
    bucket: int
    correct: int
    total: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.total if self.total else None


@dataclass
class EvalReport:
    variant: str
    runs: list[RunRecord]
    mean: float
    std: float
    buckets: list[BucketRow] = field(default_factory=list)
    tunable_parameters: int = 0
    tunable_parameters_no_bias: int = 0
    timings: dict = field(default_factory=dict)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.runs])

    @classmethod
    def from_runs(cls, variant, runs, **kw):
        runs = sorted(runs, key=lambda r: (r.task_index, r.repeat))
        acc = np.array([r.accuracy for r in runs])
        return cls(variant, runs, 100.0 * float(acc.mean()), 100.0 * float(acc.std()), **kw)

    def same_results(self, other: "EvalReport") -> bool:
        """Equality ignoring wall-clock timings."""
        a, b = dataclasses.asdict(self), dataclasses.asdict(other)
        a.pop("timings")
        b.pop("timings")
        return a == b


def bucket_accuracy(node_ids, correct, g: Graph, labels=None, task_kind: str = "node") -> list[BucketRow]:
    """Aggregate query outcomes by node-homophily bucket (isolated nodes last)."""
    if task_kind != "node":
        raise DataError("bucket analysis requires node task")
    buckets = homophily_buckets(g, labels)
    node_ids = np.asarray(node_ids, dtype=np.int64)
    correct = np.asarray(correct, dtype=bool)
    rows = []
    for b in [*range(NUM_BUCKETS), ISOLATED]:
        mask = buckets[node_ids] == b
        rows.append(BucketRow(b, int(np.count_nonzero(correct[mask])), int(np.count_nonzero(mask))))
    return rows


def run_pipeline(cfg: ExperimentConfig, encoder: GcnEncoder | None = None, source=None) -> EvalReport:
    """Pre-train once (or reuse ``encoder``), then tune and score every (task, repeat) run.

    Task ``t`` is sampled with seed ``(seed, t)``; repeat ``r`` initializes its
    prompt model with seed ``(seed, t, r)``. Runs are independent, so their
    order does not affect the report.
    """
    timings = {}
    t0 = time.perf_counter()
    source = load_source(cfg) if source is None else source
    data = task_data(cfg, source)
    labels = instance_labels(data)
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if encoder is None:
        encoder, _ = build_encoder(cfg, source)
    elif not encoder.frozen:
        raise FreezeViolationError("run_pipeline needs a frozen encoder")
    timings["pretrain"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    prepared = prepare_prompt_data(encoder, data, cfg.delta, _CONDITION[cfg.variant])
    timings["prepare"] = time.perf_counter() - t0

    q = queries_per_class(cfg, labels)

    t0 = time.perf_counter()
    pairs = [(t, r) for t in range(cfg.num_tasks) for r in range(cfg.seeds)]
    dim = encoder.out_dim
    outcomes = sorted(run_tasks(cfg, prepared, labels, dim, q, pairs),
                      key=lambda o: (o[0].task_index, o[0].repeat))
    runs = [o[0] for o in outcomes]
    q_nodes = [v for o in outcomes for v in o[1]]
    q_correct = [h for o in outcomes for h in o[2]]
    timings["tune"] = time.perf_counter() - t0

    buckets = []
    if cfg.task_kind == "node" and isinstance(data, Graph) and data.labels is not None:
        buckets = bucket_accuracy(q_nodes, q_correct, data)
    return EvalReport.from_runs(
        cfg.variant, runs, buckets=buckets,
        tunable_parameters=count_tunable_parameters(cfg.variant, dim, cfg.cond_hidden),
        tunable_parameters_no_bias=count_tunable_parameters(cfg.variant, dim, cfg.cond_hidden, False),
        timings=timings)


def run_tasks(cfg: ExperimentConfig, prepared, labels, dim: int, q: int, pairs):
    """Tune and score each ``(task_index, repeat)`` pair independently.

    Returns ``(RunRecord, query_ids, hits)`` per pair, in the given order.
    """
    out = []
    for t, r in pairs:
        task = sample_kshot_task(labels, cfg.shots, q, derived_seed(cfg.seed, t), cfg.task_kind)
        run_seed = derived_seed(cfg.seed, t, r)
        model = make_prompt_model(cfg.variant, dim, cfg.cond_hidden, run_seed, prepared)
        fit_prompt(model, prepared, task, cfg.tune_config(run_seed))
        pred, truth = evaluate_task(model, prepared, task)
        hits = pred == truth
        out.append((RunRecord(t, r, float(hits.mean()), int(hits.sum()), len(hits)),
                    [i for i, _ in task.query], hits.tolist()))
    return out


def run_variant(cfg: ExperimentConfig, variant: str, encoder: GcnEncoder | None = None, source=None) -> EvalReport:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    return run_pipeline(dataclasses.replace(cfg, variant=variant), encoder, source)


_SUMMARY_COLS = ["variant", "runs", "mean_percent", "std_percent", "tunable_parameters",
                 "tunable_parameters_no_bias"]
_RUN_COLS = ["task_index", "repeat", "accuracy", "correct", "total"]
_BUCKET_COLS = ["bucket", "correct", "total", "accuracy"]
_TIMING_COLS = ["phase", "seconds"]


def report_to_dict(report: EvalReport) -> dict:
    return {
        "summary": {"variant": report.variant, "runs": len(report.runs), "mean_percent": report.mean,
                    "std_percent": report.std, "tunable_parameters": report.tunable_parameters,
                    "tunable_parameters_no_bias": report.tunable_parameters_no_bias},
        "runs": [dataclasses.asdict(r) for r in report.runs],
        "buckets": [{"bucket": b.bucket, "correct": b.correct, "total": b.total, "accuracy": b.accuracy}
                    for b in report.buckets],
        "timings": dict(report.timings),
    }


def report_from_dict(d: dict) -> EvalReport:
    s = d["summary"]
    return EvalReport(
        s["variant"],
        [RunRecord(int(r["task_index"]), int(r["repeat"]), float(r["accuracy"]), int(r["correct"]), int(r["total"]))
         for r in d["runs"]],
        float(s["mean_percent"]), float(s["std_percent"]),
        [BucketRow(int(b["bucket"]), int(b["correct"]), int(b["total"])) for b in d["buckets"]],
        int(s["tunable_parameters"]), int(s["tunable_parameters_no_bias"]),
        {k: float(v) for k, v in d.get("timings", {}).items()})


def format_report(report: EvalReport, fmt: str) -> str:
    """Serialize as JSON or as a sectioned CSV (``[section]`` line, header row, data rows)."""
    d = report_to_dict(report)
    if fmt == "json":
        return json.dumps(d, indent=2) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")

    def cell(v):
        return "" if v is None else (repr(float(v)) if isinstance(v, float) else v)

    def section(name, cols, rows):
        w.writerow([f"[{name}]"])
        w.writerow(cols)
        for row in rows:
            w.writerow([cell(row[c]) for c in cols])

    section("summary", _SUMMARY_COLS, [d["summary"]])
    section("runs", _RUN_COLS, d["runs"])
    section("buckets", _BUCKET_COLS, d["buckets"])
    section("timings", _TIMING_COLS, [{"phase": k, "seconds": v} for k, v in d["timings"].items()])
    return buf.getvalue()


def emit_report(report: EvalReport, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    path.write_text(format_report(report, fmt), encoding="utf-8")


def parse_csv_report(text: str) -> dict:
    sections, current, header = {}, None, None
    for row in csv.reader(io.StringIO(text)):
        if not row:
            continue
        if len(row) == 1 and row[0].startswith("[") and row[0].endswith("]"):
            current, header = row[0][1:-1], None
            sections[current] = []
        elif header is None:
            header = row
        else:
            sections[current].append({k: (v if v != "" else None) for k, v in zip(header, row)})
    if "summary" not in sections or len(sections["summary"]) != 1:
        raise DataError("report has no summary row")
    return {"summary": sections["summary"][0], "runs": sections.get("runs", []),
            "buckets": sections.get("buckets", []),
            "timings": {r["phase"]: r["seconds"] for r in sections.get("timings", [])}}


def read_report(path) -> EvalReport:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return report_from_dict(json.loads(text))
    return report_from_dict(parse_csv_report(text))
