"""Command-line entry point.

Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .encoder import GcnEncoder, freeze, parameter_digest, save_encoder
from .errors import ConfigError, DataError, NumericalError, ShapeError
from .experiment import (
    _CONDITION,
    build_encoder,
    derived_seed,
    emit_report,
    format_report,
    instance_labels,
    load_config,
    load_source,
    make_prompt_model,
    queries_per_class,
    read_report,
    run_pipeline,
    task_data,
)
from .graph import (
    ISOLATED,
    NUM_BUCKETS,
    graph_homophily_ratio,
    homophily_buckets,
    load_graph,
    node_homophily_counts,
    sample_kshot_task,
)
from .pretrain import pretrain, verify_theorem1, verify_theorem2
from .prompt import ConditionalPrompt, evaluate_task, fit_prompt, prepare_prompt_data, save_condition_net

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _cmd_pretrain(args) -> int:
    cfg = load_config(args.config)
    out = args.output or cfg.checkpoint
    if not out:
        raise ConfigError("pretrain needs --output or a checkpoint key in the config")
    source = load_source(cfg)
    d_in = source.feature_dim if hasattr(source, "feature_dim") else source.graphs[0].feature_dim
    enc = GcnEncoder.create([d_in, *cfg.hidden_dims()], seed=cfg.seed, activation=cfg.encoder_activation)
    result = pretrain(enc, source, cfg.pretrain_config())
    freeze(enc)
    save_encoder(enc, out)
    print(f"epochs={len(result.losses)} best_epoch={result.best_epoch} "
          f"first_loss={result.losses[0]:.6f} best_loss={result.best_losses[-1]:.6f}")
    print(f"digest={parameter_digest(enc)}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_tune(args) -> int:
    cfg = load_config(args.config)
    source = load_source(cfg)
    data = task_data(cfg, source)
    enc, _ = build_encoder(cfg, source)
    prepared = prepare_prompt_data(enc, data, cfg.delta, _CONDITION[cfg.variant])
    labels = instance_labels(data)
    q = queries_per_class(cfg, labels)
    task = sample_kshot_task(labels, cfg.shots, q, derived_seed(cfg.seed, args.task_index), cfg.task_kind)
    seed = derived_seed(cfg.seed, args.task_index, 0)
    model = make_prompt_model(cfg.variant, enc.out_dim, cfg.cond_hidden, seed, prepared)
    before = parameter_digest(enc)
    result = fit_prompt(model, prepared, task, cfg.tune_config(seed))
    if parameter_digest(enc) != before:
        raise NumericalError("encoder parameters changed during tuning")
    pred, truth = evaluate_task(model, prepared, task)
    print(f"variant={cfg.variant} epochs={len(result.losses)} best_epoch={result.best_epoch} "
          f"final_loss={result.losses[-1]:.6f}" if result.losses else f"variant={cfg.variant} epochs=0")
    print(f"query_accuracy={float(np.mean(pred == truth)):.4f}")
    if args.output:
        if not isinstance(model, ConditionalPrompt):
            raise ConfigError(f"variant {cfg.variant} has no condition-net to save")
        save_condition_net(model.cn, args.output)
        print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    report = run_pipeline(cfg)
    out = args.output or cfg.output
    if out:
        emit_report(report, out, args.format)
        print(f"wrote {out}")
    print(f"variant={report.variant} runs={len(report.runs)} "
          f"accuracy={report.mean:.2f}+-{report.std:.2f} tunable_parameters={report.tunable_parameters}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    g = load_graph(args.graph)
    same, deg = np.array([node_homophily_counts(g, v) for v in range(g.num_nodes)], dtype=np.int64).reshape(-1, 2).T
    buckets = homophily_buckets(g)
    print(f"nodes={g.num_nodes} edges={g.num_edges} graph_homophily={graph_homophily_ratio(g):.6f}")
    for b in range(NUM_BUCKETS):
        print(f"bucket[{b / NUM_BUCKETS:.1f},{(b + 1) / NUM_BUCKETS:.1f}{']' if b == NUM_BUCKETS - 1 else ')'}"
              f"={int(np.count_nonzero(buckets == b))}")
    print(f"isolated={int(np.count_nonzero(buckets == ISOLATED))}")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "degree", "same_label", "ratio", "bucket"])
            for v in range(g.num_nodes):
                ratio = repr(float(same[v] / deg[v])) if deg[v] else ""
                w.writerow([v, int(deg[v]), int(same[v]), ratio, int(buckets[v])])
        print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    t1 = verify_theorem1(args.trials, seed=args.seed)
    grid = [float(x) for x in args.h_grid.split(",")]
    t2 = verify_theorem2(grid, seeds=args.seeds, base_seed=args.seed)
    ok1 = t1.violations == 0
    ok2 = t2.statistic >= args.min_correlation
    print(f"{'PASS' if ok1 else 'FAIL'} adding-homophily-sample: trials={t1.trials} "
          f"violations={t1.violations} skipped={t1.skipped}")
    print(f"{'PASS' if ok2 else 'FAIL'} count-vs-homophily: spearman={t2.statistic:.4f} "
          f"means={' '.join(f'{h}:{m:.2f}' for h, m in t2.means.items())}")
    if args.csv_dir:
        d = Path(args.csv_dir)
        d.mkdir(parents=True, exist_ok=True)
        t1.to_csv(d / "theorem1.csv")
        t2.to_csv(d / "theorem2.csv")
    return EXIT_OK if ok1 and ok2 else EXIT_NUMERIC


def _cmd_report(args) -> int:
    text = format_report(read_report(args.results), args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nhprompt", description="Graph pre-training and conditional prompt tuning.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("pretrain", help="pre-train an encoder and save a checkpoint")
    s.add_argument("config")
    s.add_argument("--output", help="checkpoint path (defaults to the config's checkpoint key)")
    s.set_defaults(func=_cmd_pretrain)

    s = sub.add_parser("tune", help="tune a prompt on one sampled task and score its queries")
    s.add_argument("config")
    s.add_argument("--task-index", type=int, default=0)
    s.add_argument("--output", help="save the tuned condition-net here")
    s.set_defaults(func=_cmd_tune)

    s = sub.add_parser("evaluate", help="run the full k-shot protocol")
    s.add_argument("config")
    s.add_argument("--output")
    s.add_argument("--format", choices=("csv", "json"))
    s.set_defaults(func=_cmd_evaluate)

    s = sub.add_parser("analyze-homophily", help="homophily ratios and bucket counts of a graph")
    s.add_argument("graph")
    s.add_argument("--output", help="per-node CSV")
    s.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("verify-theorems", help="run the contrastive-loss property harnesses")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--h-grid", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-correlation", type=float, default=0.99)
    s.add_argument("--csv-dir")
    s.set_defaults(func=_cmd_verify)

    s = sub.add_parser("report", help="convert a results file between csv and json")
    s.add_argument("results")
    s.add_argument("--format", choices=("csv", "json"), required=True)
    s.add_argument("--output")
    s.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
