"""Command-line entry points.

    batchbo run    --objective branin --strategy kmbbo --out results/ ...
    batchbo rank   --inputs results/a results/b ... [--out table.csv]
    batchbo oracle --objective branin [--samples 100000]

``run`` flags may also come from a JSON config file (--config); explicit
flags override the file, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .harness import ExperimentConfig, aggregate_z, emit_outputs, run_experiment, z_score
from .objectives import OBJECTIVE_NAMES, get_objective, oracle_scan
from .strategies import STRATEGY_NAMES

_RUN_DEFAULTS = {
    "batch_size": 8,
    "epochs": 10,
    "n_init": 10,
    "slice_samples": 200,
    "repeats": 100,
    "seed": 42,
    "jobs": 1,
    "gp_restarts": 5,
    "gp_max_iters": 150,
    "n_grid": 2000,
    "cs_epsilon": 0.05,
    "cs_calibration_samples": 1000,
    "pool_size": 19000,
    "pool_dim": 167,
    "pool_sparsity": 10,
    "encounter_tol": None,
    "plots": True,
}


def _add_run_parser(sub):
    p = sub.add_parser("run", help="run a batch-BO experiment")
    p.add_argument("--config", type=Path, help="JSON file supplying any of the run flags")
    p.add_argument("--objective", choices=OBJECTIVE_NAMES)
    p.add_argument("--strategy", choices=STRATEGY_NAMES)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--n-init", type=int, dest="n_init")
    p.add_argument("--slice-samples", type=int, dest="slice_samples")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--gp-restarts", type=int, dest="gp_restarts")
    p.add_argument("--gp-max-iters", type=int, dest="gp_max_iters")
    p.add_argument("--n-grid", type=int, dest="n_grid")
    p.add_argument("--cs-epsilon", type=float, dest="cs_epsilon")
    p.add_argument("--cs-calibration-samples", type=int, dest="cs_calibration_samples")
    p.add_argument("--pool-size", type=int, dest="pool_size")
    p.add_argument("--pool-dim", type=int, dest="pool_dim")
    p.add_argument("--pool-sparsity", type=int, dest="pool_sparsity")
    p.add_argument("--encounter-tol", type=float, dest="encounter_tol")
    p.add_argument("--no-plots", action="store_true")


def _resolve(args, config: dict, key: str):
    cli = getattr(args, key, None)
    if cli is not None:
        return cli
    if key in config:
        return config[key]
    return _RUN_DEFAULTS.get(key)


def _cmd_run(args) -> int:
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    get = lambda key: _resolve(args, config, key)  # noqa: E731

    objective = get("objective")
    strategy = get("strategy")
    out = get("out")
    if not objective or not strategy or not out:
        print("error: --objective, --strategy and --out are required "
              "(flags or config file)", file=sys.stderr)
        return 2

    objective_params = {}
    if objective == "sparse-pool":
        objective_params = {
            "pool_size": get("pool_size"),
            "pool_dim": get("pool_dim"),
            "pool_sparsity": get("pool_sparsity"),
            "seed": get("seed"),
        }
    cfg = ExperimentConfig(
        objective=objective,
        strategy=strategy,
        objective_params=objective_params,
        strategy_params={"n_grid": get("n_grid")},
        batch_size=get("batch_size"),
        n_epochs=get("epochs"),
        n_init=get("n_init"),
        n_slice=get("slice_samples"),
        n_repeats=get("repeats"),
        base_seed=get("seed"),
        gp_restarts=get("gp_restarts"),
        gp_max_iters=get("gp_max_iters"),
        cs_epsilon=get("cs_epsilon"),
        cs_calibration_samples=get("cs_calibration_samples"),
        encounter_tol=get("encounter_tol"),
        jobs=get("jobs"),
    )
    result = run_experiment(cfg)
    plots = not args.no_plots and bool(_resolve(args, config, "plots"))
    written = emit_outputs(result, Path(out), plots=plots)

    s = result.summary
    print(f"{strategy} on {objective}: {s['n_success']}/{cfg.n_repeats} repeats succeeded")
    if "final_regret_mean" in s:
        print(f"  final regret {s['final_regret_mean']:.6g} "
              f"+- {s['final_regret_std']:.6g} (std over repeats)")
    if "first_encounter_counts" in s:
        print(f"  first-encounter tolerance {s['encounter_tol']:.6g}: "
              f"{s['first_encounter_counts']}")
    if s["n_failed"]:
        print(f"  warning: {s['n_failed']} failed repeats "
              f"({[f['error'] for f in s['failures'][:3]]}...)")
    for path in written:
        print(f"  wrote {path}")
    return 0


def _cmd_rank(args) -> int:
    score_by_task: dict = {}
    std_by_task: dict = {}
    for directory in args.inputs:
        path = Path(directory) / "result.json"
        if not path.exists():
            print(f"warning: no result.json under {directory}, skipped", file=sys.stderr)
            continue
        doc = json.loads(path.read_text())
        task = doc["config"]["objective"]
        strategy = doc["config"]["strategy"]
        summary = doc["summary"]
        if "final_regret_mean" not in summary:
            print(f"warning: {path} has no regret summary, skipped", file=sys.stderr)
            continue
        score_by_task.setdefault(task, {})[strategy] = summary["final_regret_mean"]
        std_by_task.setdefault(task, {})[strategy] = summary["final_regret_std"]

    usable = {t for t, scores in score_by_task.items() if len(scores) >= 2}
    if not usable:
        print("error: need at least one task with two strategies", file=sys.stderr)
        return 2
    z_perf = {t: z_score(score_by_task[t]).values for t in sorted(usable)}
    z_var = {t: z_score(std_by_task[t]).values for t in sorted(usable)}
    agg_perf = aggregate_z(z_perf)
    agg_var = aggregate_z(z_var)

    rows = [(s, agg_perf[s], agg_var.get(s, "")) for s in sorted(agg_perf)]
    print(f"{'strategy':<12} {'z_performance':>14} {'z_variance':>12}")
    for name, zp, zv in rows:
        zv_text = f"{zv:.4f}" if isinstance(zv, float) else zv
        print(f"{name:<12} {zp:>14.4f} {zv_text:>12}")
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["strategy", "z_performance", "z_variance"])
            w.writerows(rows)
        print(f"wrote {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    params = {}
    if args.objective == "sparse-pool":
        params = {"pool_size": args.pool_size, "pool_dim": args.pool_dim,
                  "pool_sparsity": args.pool_sparsity, "seed": args.seed}
    objective = get_objective(args.objective, **params)
    best, value_range = oracle_scan(objective, n=args.samples, seed=args.seed)
    print(f"{args.objective}: oracle best {best:.9g} over {args.samples} samples, "
          f"value range {value_range:.6g}")
    if objective.known_optimum is None:
        print("  no known optimum recorded")
        return 0
    print(f"  known optimum {objective.known_optimum:.9g}")
    sign = 1.0 if objective.direction == "maximize" else -1.0
    excess = sign * (best - objective.known_optimum)
    if excess > 1e-9:
        print(f"  ERROR: oracle beat the recorded optimum by {excess:.3g}")
        return 1
    print("  ok: oracle never beats the recorded optimum (tolerance 1e-9)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="batchbo",
                                     description="Batch Bayesian optimization benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)

    p_rank = sub.add_parser("rank", help="aggregate Z-score table across result dirs")
    p_rank.add_argument("--inputs", nargs="+", required=True)
    p_rank.add_argument("--out", type=Path)

    p_oracle = sub.add_parser("oracle", help="brute-force optimum verification")
    p_oracle.add_argument("--objective", choices=OBJECTIVE_NAMES, required=True)
    p_oracle.add_argument("--samples", type=int, default=100_000)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--pool-size", type=int, dest="pool_size", default=19000)
    p_oracle.add_argument("--pool-dim", type=int, dest="pool_dim", default=167)
    p_oracle.add_argument("--pool-sparsity", type=int, dest="pool_sparsity", default=10)

    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "rank":
        return _cmd_rank(args)
    return _cmd_oracle(args)


if __name__ == "__main__":
    sys.exit(main())
