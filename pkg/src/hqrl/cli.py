"""Command-line entry points.

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .ansatz import AnsatzKind
from .config import ConfigError, resolve_config
from .datasets import gen_data, load_dataset
from .hamiltonians import (
    brute_force,
    knapsack_from_json,
    knapsack_optimum,
    knapsack_qubo_slack,
    knapsack_qubo_unbalanced,
    graph_from_json,
    maxcut_optimum,
)
from .run import evaluate_checkpoint, run_qaoa_experiment, train
from .trainability import run_variance_bench, write_variance_csv

VAL_SEED_OFFSET = 1_000_003


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory or file")


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    mapping = {
        "problem": "problem", "algorithm": "algorithm", "ansatz": "ansatz",
        "head": "head", "steps": "total_steps", "seeds": "seeds",
        "dataset": "dataset", "layers": "layers", "encoding": "encoding",
        "seed": "master_seed", "out": "out",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError([f"--set expects key=value, got {item!r}"])
        key, _, raw = item.partition("=")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hqrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate an instance dataset")
    _add_common(p)
    p.add_argument("--problem", required=True, choices=("maxcut", "ucp", "knapsack"))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--val-count", type=int, default=0,
                   help="also emit a validation split with a disjoint seed")

    p = sub.add_parser("train", help="train agents over a dataset")
    _add_common(p)
    for flag, kwargs in [
        ("--problem", {"choices": ("maxcut", "ucp", "knapsack")}),
        ("--algorithm", {"choices": ("qpg", "qdqn")}),
        ("--ansatz", {"choices": [k.value for k in AnsatzKind]}),
        ("--head", {}), ("--dataset", {}),
        ("--steps", {"type": int}), ("--seeds", {"type": int}),
        ("--layers", {"type": int}),
    ]:
        p.add_argument(flag, **kwargs)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("evaluate", help="run inference episodes from a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--episodes", type=int, default=None,
                   help="episodes per instance")

    p = sub.add_parser("bench-variance", help="gradient-variance benchmark")
    _add_common(p)
    p.add_argument("--kinds", default=",".join(k.value for k in AnsatzKind))
    p.add_argument("--n-values", default="4,6,8,10")
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("qaoa", help="QAOA baseline over a knapsack dataset")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--encoding", choices=("unbalanced", "slack"), default="unbalanced")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")

    p = sub.add_parser("brute-force", help="exact optimum of an instance or dataset")
    _add_common(p)
    p.add_argument("--problem", required=True, choices=("maxcut", "knapsack"))
    p.add_argument("--instance", help="single instance JSON file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--encoding", choices=("unbalanced", "slack"),
                   help="also solve the penalized knapsack QUBO")
    return parser


def _cmd_gen_data(args) -> int:
    out = Path(args.out or "data")
    seed = args.seed if args.seed is not None else 0
    if args.val_count > 0:
        train_manifest = gen_data(args.problem, args.count, args.size, seed,
                                  out / "train")
        val_manifest = gen_data(args.problem, args.val_count, args.size,
                                seed + VAL_SEED_OFFSET, out / "val")
        print(json.dumps({"train": train_manifest["count"],
                          "val": val_manifest["count"], "out": str(out)}))
    else:
        manifest = gen_data(args.problem, args.count, args.size, seed, out)
        print(json.dumps({"count": manifest["count"], "out": str(out)}))
    return 0


def _cmd_train(args) -> int:
    cfg = resolve_config(args.config, _collect_overrides(args))
    result = train(cfg, resume=args.resume)
    print(json.dumps({"run_dir": str(result.run_dir),
                      "seeds": len(result.metrics_paths)}))
    return 0


def _cmd_evaluate(args) -> int:
    out_csv = args.out
    summary = evaluate_checkpoint(args.checkpoint, args.dataset,
                                  episodes_per_instance=args.episodes,
                                  out_csv=out_csv)
    print(json.dumps({"mean_p_optimal": summary.mean_p_optimal,
                      "mean_p_valid": summary.mean_p_valid,
                      "mean_ratio": summary.mean_ratio}))
    return 0


def _cmd_bench_variance(args) -> int:
    kinds = [AnsatzKind(k.strip()) for k in args.kinds.split(",") if k.strip()]
    n_values = [int(v) for v in args.n_values.split(",")]
    seed = args.seed if args.seed is not None else 0
    results = run_variance_bench(kinds, n_values, layers=args.layers,
                                 samples=args.samples, seed=seed)
    out = args.out or "variance.csv"
    write_variance_csv(out, results)
    print(json.dumps({"rows": len(results), "out": str(out)}))
    return 0


def _cmd_qaoa(args) -> int:
    overrides = _collect_overrides(args)
    overrides.setdefault("problem", "knapsack")
    overrides.setdefault("algorithm", "qaoa")
    overrides["dataset"] = args.dataset
    cfg = resolve_config(args.config, overrides)
    out = args.out or "qaoa.csv"
    rows = run_qaoa_experiment(cfg, args.dataset, out_csv=out)
    print(json.dumps({"rows": len(rows), "out": str(out)}))
    return 0


def _cmd_brute_force(args) -> int:
    if not args.instance and not args.dataset:
        raise ConfigError(["brute-force needs --instance or --dataset"])
    paths = []
    if args.instance:
        paths = [Path(args.instance)]
    else:
        data = load_dataset(args.dataset)
        paths = [data.path / name for name in data.manifest["instances"]]
    rows = []
    for path in paths:
        text = path.read_text()
        if args.problem == "maxcut":
            g = graph_from_json(text)
            rows.append({"instance": path.name, "optimum": maxcut_optimum(g)})
        else:
            inst = knapsack_from_json(text)
            best, bits = knapsack_optimum(inst)
            row = {"instance": path.name, "optimum": best,
                   "selection": "".join(str(b) for b in bits)}
            if args.encoding:
                if args.encoding == "unbalanced":
                    qubo = knapsack_qubo_unbalanced(inst, 1.0, 1.0)
                else:
                    qubo = knapsack_qubo_slack(inst, penalty=sum(inst.values) + 1.0)
                qbits, qval = brute_force(qubo)
                row["qubo_minimum"] = qval
                row["qubo_bits"] = "".join(str(int(b)) for b in qbits)
            rows.append(row)
    text = json.dumps(rows if len(rows) > 1 else rows[0], indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "bench-variance": _cmd_bench_variance,
    "qaoa": _cmd_qaoa,
    "brute-force": _cmd_brute_force,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        for line in err.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except Exception:  # runtime failure
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
