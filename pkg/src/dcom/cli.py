"""Command-line entry points: init-delta, select, expand-delta, run-loop, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, engine, harness, learners, purity
from .errors import DcomError


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dcom", description="Coverage-and-margin active learning toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-delta", help="estimate the purity curve and pick delta0")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--alpha", type=float, default=purity.DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--grid-max", type=float, default=2.0)
    p.add_argument("--no-normalize", action="store_true")

    p = sub.add_parser("select", help="run one query-selection step from a config")
    p.add_argument("--config", required=True)

    p = sub.add_parser("expand-delta", help="assign radii to newly labeled points")
    p.add_argument("--config", required=True)

    p = sub.add_parser("run-loop", help="run the full seeded experiment loop")
    p.add_argument("--config", required=True)

    p = sub.add_parser("report", help="summarize an existing report CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--output", default=None)
    return parser


def _load_pool_inputs(config):
    dataset = harness.load_dataset(config["data"])
    labeled = [int(i) for i in config.get("labeled", [])]
    unlabeled = [i for i in range(dataset.count) if i not in set(labeled)]
    deltas = [float(d) for d in config.get("deltas", [])]
    return dataset, engine.PoolState(labeled, unlabeled, deltas)


def _cmd_init_delta(args):
    dataset = harness.load_dataset(
        {"embeddings": args.embeddings, "l2_normalize": not args.no_normalize}
    )
    labels = purity.kmeans_cluster(dataset, args.classes, seed=args.seed)
    steps = int(np.floor(args.grid_max / args.grid_step + 1e-9))
    grid = args.grid_step * np.arange(1, steps + 1)
    curve = purity.estimate_purity_curve(dataset, labels, grid)
    print("delta,purity")
    for d, p in zip(curve.grid, curve.purity):
        print(f"{d:.6g},{p:.6g}")
    print(f"delta0,{purity.select_initial_delta(curve, args.alpha):.6g}")
    return 0


def _cmd_select(args):
    config = json.loads(Path(args.config).read_text())
    dataset, pool = _load_pool_inputs(config)
    kind = config.get("strategy", {}).get("kind", "dcom")
    q = int(config["q"])
    seed = config.get("strategy", {}).get("seed", 0)
    if kind == "dcom":
        delta0 = config.get("dcom", {}).get("delta0") or harness.resolve_delta0(
            dataset, config.get("dcom", {}), dataset.num_classes, seed
        )
        dcom_config = harness._build_dcom_config(
            config.get("dcom", {}), delta0, dataset.num_classes
        )
        if not pool.deltas:
            pool.deltas = [dcom_config.delta0] * len(pool.labeled)
        spec = learners.LearnerSpec(**config.get("learner", {"seed": seed}))
        result, _, _, _ = engine.run_iteration(dataset, pool, spec, q, dcom_config)
        picks = result.selected
    elif kind == "random":
        picks = baselines.select_random(pool, q, seed)
    elif kind == "coreset":
        picks = baselines.select_coreset(dataset, pool, q)
    elif kind == "probcover":
        delta0 = config.get("dcom", {}).get("delta0") or harness.resolve_delta0(
            dataset, config.get("dcom", {}), dataset.num_classes, seed
        )
        picks = baselines.select_probcover(dataset, pool, delta0, q)
    else:
        spec = learners.LearnerSpec(**config.get("learner", {"seed": seed}))
        pairs = [(i, int(dataset.labels[i])) for i in pool.labeled]
        learner = learners.train_learner(dataset, pairs, spec)
        probs = learners.predict_softmax(learner, dataset, pool.unlabeled)
        picks = baselines.select_by_uncertainty(pool, probs, kind, q)
    print(",".join(str(i) for i in picks))
    return 0


def _cmd_expand_delta(args):
    config = json.loads(Path(args.config).read_text())
    dataset, pool = _load_pool_inputs(config)
    query = [int(i) for i in config["query"]]
    dcom_config = harness._build_dcom_config(
        config.get("dcom", {}), float(config["dcom"]["delta0"]), dataset.num_classes
    )
    coverage_old = (0.0 if not pool.deltas else
                    engine.covered_set(
                        dataset,
                        [i for i in pool.labeled if i not in set(query)],
                        pool.deltas,
                    ).probability)
    spec = learners.LearnerSpec(**config.get("learner", {}))
    pairs = [(i, int(dataset.labels[i])) for i in pool.labeled]
    learner = learners.train_learner(dataset, pairs, spec)
    probs = learners.predict_softmax(learner, dataset, pool.unlabeled)
    predicted = probs.rows.argmax(axis=1)
    deltas = engine.expand_delta(
        dataset, pool, query, predicted, coverage_old, dcom_config
    )
    print(",".join(f"{d:.6g}" for d in deltas))
    return 0


def _cmd_run_loop(args):
    config = json.loads(Path(args.config).read_text())
    records = harness.run_al_loop(config)
    out_dir = Path(config.get("output", "out"))
    csv_path = out_dir / "report.csv"
    harness.write_report(records, csv_path)
    print(f"wrote {csv_path} and {csv_path.with_suffix('.json')}")
    return 0


def _cmd_report(args):
    records = harness.read_report(args.records)
    summary = harness.summarize(records)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


_COMMANDS = {
    "init-delta": ("pseudo-purity", _cmd_init_delta),
    "select": ("query-selection", _cmd_select),
    "expand-delta": ("radius-expansion", _cmd_expand_delta),
    "run-loop": ("experiment-harness", _cmd_run_loop),
    "report": ("reporting", _cmd_report),
}


def cli_dispatch(argv) -> int:
    """Parse and run; usage errors exit 2, runtime errors exit 1."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    module, handler = _COMMANDS[args.command]
    try:
        return handler(args)
    except (DcomError, OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error ({module}): {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
