"""Experiment orchestration: seeded repeats, regret metrics, rankings,
and file outputs.

A run is: draw an initial design, then loop epochs of (fit surrogate ->
build batch -> evaluate -> append).  Repeats are independent, seeded
``base_seed + r``, and may execute in a process pool without changing
results.  Failures are recorded per repeat, never silently dropped.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from . import compression
from .errors import MetricUnavailable, ParameterError, StrategyFailure
from .gp import fit
from .objectives import get_objective, oracle_scan
from .strategies import build_batch

SCHEMA_VERSION = 1
_MAX_SEED = 2**31 - 1
_QUANTILES = (10, 25, 50, 75, 90)


@dataclass
class ExperimentConfig:
    objective: str
    strategy: str
    objective_params: dict = field(default_factory=dict)
    strategy_params: dict = field(default_factory=dict)
    batch_size: int = 8
    n_epochs: int = 10
    n_init: int = 10
    n_slice: int = 200
    n_repeats: int = 100
    base_seed: int = 0
    gp_restarts: int = 5
    gp_max_iters: int = 150
    cs_epsilon: float = 0.05
    cs_calibration_samples: int = 1000
    encounter_tol: Optional[float] = None
    jobs: int = 1

    def __post_init__(self):
        for name in ("batch_size", "n_epochs", "n_init", "n_slice", "n_repeats",
                     "gp_restarts", "jobs"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    points: list
    values: list
    best_so_far: float
    regret: Optional[float]
    wall_seconds: float
    flags: list = field(default_factory=list)
    gp_hyperparams: Optional[dict] = None


@dataclass
class RepeatResult:
    repeat_index: int
    seed: int
    records: list
    failed: bool = False
    failure: Optional[str] = None
    compression: Optional[dict] = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    repeats: list
    summary: dict
    known_optimum: Optional[float]
    direction: str

    def successful_repeats(self) -> list:
        return [r for r in self.repeats if not r.failed]


def _epoch_record(epoch, points, values, data, objective, wall, flags, gp_hp=None):
    return EpochRecord(
        epoch=epoch,
        points=[np.asarray(p, dtype=float).tolist() for p in points],
        values=[float(v) for v in values],
        best_so_far=float(data.best_value),
        regret=objective.regret(data.best_value),
        wall_seconds=float(wall),
        flags=list(flags),
        gp_hyperparams=gp_hp,
    )


def _run_repeat(cfg: ExperimentConfig, r: int) -> RepeatResult:
    objective = get_objective(cfg.objective, **cfg.objective_params)
    seed = cfg.base_seed + r
    try:
        if cfg.strategy == "cs-kmbbo":
            return _run_repeat_compressed(cfg, objective, r, seed)
        return _run_repeat_plain(cfg, objective, r, seed)
    except Exception as exc:  # noqa: BLE001 - failures are a recorded outcome
        return RepeatResult(r, seed, records=[], failed=True,
                            failure=f"{type(exc).__name__}: {exc}")


def _run_repeat_plain(cfg, objective, r, seed) -> RepeatResult:
    domain = objective.domain
    rng = np.random.default_rng(seed)
    data = objective.new_dataset()

    t0 = time.perf_counter()
    if domain.kind == "discrete":
        init = domain.candidates[rng.choice(domain.n_candidates, cfg.n_init, replace=False)]
    else:
        init = domain.sample_uniform(cfg.n_init, rng)
    for x in init:
        data.append(x, objective.evaluate(x))
    records = [_epoch_record(0, init, data.values, data, objective,
                             time.perf_counter() - t0, [])]

    params = dict(cfg.strategy_params)
    params.setdefault("n_slice", cfg.n_slice)
    params.setdefault("gp_restarts", cfg.gp_restarts)
    params.setdefault("gp_max_iters", cfg.gp_max_iters)

    for t in range(1, cfg.n_epochs + 1):
        t0 = time.perf_counter()
        seed_fit = int(rng.integers(_MAX_SEED))
        seed_strategy = int(rng.integers(_MAX_SEED))
        gp = fit(data, domain, restarts=cfg.gp_restarts, seed=seed_fit,
                 max_iters=cfg.gp_max_iters)
        batch = build_batch(cfg.strategy, gp, data, domain, cfg.batch_size,
                            seed_strategy, params)
        if batch.points.shape[0] != cfg.batch_size:
            raise StrategyFailure(
                f"{cfg.strategy} returned {batch.points.shape[0]} points, "
                f"expected {cfg.batch_size}"
            )
        for x in batch.points:
            if not domain.contains(x):
                raise StrategyFailure(f"{cfg.strategy} returned out-of-domain point {x}")
        values = [objective.evaluate(x) for x in batch.points]
        for x, v in zip(batch.points, values):
            data.append(x, v)
        records.append(_epoch_record(t, batch.points, values, data, objective,
                                     time.perf_counter() - t0, batch.flags,
                                     gp.hyperparams_original()))
    return RepeatResult(r, seed, records)


def _run_repeat_compressed(cfg, objective, r, seed) -> RepeatResult:
    rec: dict = {}
    compression.cs_kmbbo_run(
        objective,
        k=cfg.batch_size,
        n_epochs=cfg.n_epochs,
        n_s=cfg.n_slice,
        epsilon=cfg.cs_epsilon,
        seed=seed,
        n_init=cfg.n_init,
        n_comp=cfg.cs_calibration_samples,
        gp_restarts=cfg.gp_restarts,
        gp_max_iters=cfg.gp_max_iters,
        record=rec,
    )
    records = []
    for e in rec["epochs"]:
        regret = None
        if objective.known_optimum is not None:
            regret = abs(objective.known_optimum - e["best_so_far"])
        records.append(EpochRecord(
            epoch=e["epoch"], points=e["points"], values=e["values"],
            best_so_far=e["best_so_far"], regret=regret,
            wall_seconds=e["wall_seconds"], flags=e["flags"],
            gp_hyperparams=e["gp_hyperparams"],
        ))
    return RepeatResult(r, seed, records, compression=rec["compression"])


def _bootstrap_std(values: np.ndarray, seed: int, n_resamples: int = 1000) -> float:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.shape[0], size=(n_resamples, values.shape[0]))
    return float(np.std(values[idx].mean(axis=1), ddof=1))


def _summarize(cfg, repeats, objective, encounter_tol):
    success = [r for r in repeats if not r.failed]
    summary = {
        "n_repeats": cfg.n_repeats,
        "n_success": len(success),
        "n_failed": cfg.n_repeats - len(success),
        "failures": [{"repeat_index": r.repeat_index, "error": r.failure}
                     for r in repeats if r.failed],
        "encounter_tol": encounter_tol,
    }
    if not success:
        return summary

    best = np.array([[rec.best_so_far for rec in r.records] for r in success])
    summary["final_best_mean"] = float(best[:, -1].mean())
    summary["final_best_std"] = float(best[:, -1].std(ddof=1)) if len(success) > 1 else 0.0

    walls = np.array([[rec.wall_seconds for rec in r.records[1:]] for r in success])
    summary["mean_wall_seconds_per_epoch"] = float(walls.mean()) if walls.size else 0.0

    if objective.known_optimum is not None:
        regret = np.array([[rec.regret for rec in r.records] for r in success])
        final = regret[:, -1]
        summary["final_regret_mean"] = float(final.mean())
        summary["final_regret_std"] = float(final.std(ddof=1)) if len(success) > 1 else 0.0
        summary["final_regret_bootstrap_std"] = _bootstrap_std(
            final, seed=cfg.base_seed + 0xB00715) if len(success) > 1 else 0.0
        per_epoch = []
        for t in range(regret.shape[1]):
            col = regret[:, t]
            entry = {
                "epoch": t,
                "regret_mean": float(col.mean()),
                "regret_std": float(col.std(ddof=1)) if len(success) > 1 else 0.0,
            }
            for q in _QUANTILES:
                entry[f"regret_q{q}"] = float(np.percentile(col, q))
            per_epoch.append(entry)
        summary["regret_per_epoch"] = per_epoch

        encounters = []
        for r in success:
            hits = [rec.epoch for rec in r.records if rec.regret <= encounter_tol]
            encounters.append(hits[0] if hits else math.inf)
        counts = {str(t): sum(1 for e in encounters if e == t)
                  for t in range(cfg.n_epochs + 1)}
        counts["never"] = sum(1 for e in encounters if e == math.inf)
        summary["first_encounter_counts"] = counts
    return summary


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute all repeats of the configured experiment."""
    objective = get_objective(cfg.objective, **cfg.objective_params)
    encounter_tol = cfg.encounter_tol
    if encounter_tol is None and objective.known_optimum is not None:
        _, value_range = oracle_scan(objective, n=100_000, seed=cfg.base_seed)
        encounter_tol = 1e-2 * value_range

    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            repeats = list(pool.map(_run_repeat, [cfg] * cfg.n_repeats,
                                    range(cfg.n_repeats)))
    else:
        repeats = [_run_repeat(cfg, r) for r in range(cfg.n_repeats)]

    summary = _summarize(cfg, repeats, objective, encounter_tol)
    if summary["n_failed"]:
        warnings.warn(
            f"{summary['n_failed']} of {cfg.n_repeats} repeats failed "
            f"({cfg.strategy} on {cfg.objective})",
            stacklevel=2,
        )
    return ExperimentResult(cfg, repeats, summary, objective.known_optimum,
                            objective.direction)


def first_encounter(result: ExperimentResult, tol: float) -> list:
    """Per successful repeat: the earliest epoch (initial design = 0) at
    which regret drops to tol, or math.inf if it never does."""
    if result.known_optimum is None:
        raise MetricUnavailable("first-encounter time needs a known optimum")
    out = []
    for rep in result.successful_repeats():
        hits = [rec.epoch for rec in rep.records if rec.regret <= tol]
        out.append(hits[0] if hits else math.inf)
    return out


@dataclass
class ZScores:
    values: dict
    degenerate: bool = False


def z_score(scores: Mapping[str, float]) -> ZScores:
    """Normalized ranking: 0 for the best (lowest) score, 1 for the
    worst, linear in between.  Equal scores are flagged degenerate."""
    if len(scores) < 2:
        raise ParameterError("z_score needs at least 2 strategies")
    vals = np.array([float(v) for v in scores.values()])
    if not np.all(np.isfinite(vals)):
        raise ParameterError("z_score needs finite scores")
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        return ZScores({k: 0.0 for k in scores}, degenerate=True)
    return ZScores({k: (float(v) - lo) / (hi - lo) for k, v in scores.items()})


def aggregate_z(z_by_task: Mapping[str, Mapping[str, float]]) -> dict:
    """Mean Z per strategy across tasks.  Strategies missing from any
    task are excluded with a warning (the not-run case)."""
    tasks = list(z_by_task)
    if not tasks:
        raise ParameterError("no tasks to aggregate")
    common = set(z_by_task[tasks[0]])
    for t in tasks[1:]:
        common &= set(z_by_task[t])
    dropped = sorted({s for t in tasks for s in z_by_task[t]} - common)
    if dropped:
        warnings.warn(f"strategies not scored on every task, excluded: {dropped}",
                      stacklevel=2)
    return {s: float(np.mean([z_by_task[t][s] for t in tasks])) for s in sorted(common)}


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def result_to_dict(result: ExperimentResult) -> dict:
    return _jsonify({
        "schema_version": SCHEMA_VERSION,
        "config": asdict(result.config),
        "known_optimum": result.known_optimum,
        "direction": result.direction,
        "summary": result.summary,
        "repeats": [asdict(r) for r in result.repeats],
    })


def emit_outputs(result: ExperimentResult, out_dir, plots: bool = True) -> list:
    """Write the CSV/JSON record (and a regret plot when matplotlib is
    importable).  Returns the list of written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "result.json"
    json_path.write_text(json.dumps(result_to_dict(result), sort_keys=True, indent=2))
    written.append(json_path)

    summary = result.summary
    cfg = result.config
    table_path = out / "final_table.csv"
    with table_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["objective", "strategy", "final_regret_mean", "final_regret_std",
                    "final_best_mean", "final_best_std", "n_success", "n_failed"])
        w.writerow([
            cfg.objective,
            cfg.strategy,
            summary.get("final_regret_mean", ""),
            summary.get("final_regret_std", ""),
            summary.get("final_best_mean", ""),
            summary.get("final_best_std", ""),
            summary["n_success"],
            summary["n_failed"],
        ])
    written.append(table_path)

    if "regret_per_epoch" in summary:
        path = out / "regret_quantiles.csv"
        cols = ["epoch", "regret_mean", "regret_std"] + [f"regret_q{q}" for q in _QUANTILES]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for entry in summary["regret_per_epoch"]:
                w.writerow([entry[c] for c in cols])
        written.append(path)

    if "first_encounter_counts" in summary:
        path = out / "first_encounter.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "count", "tolerance"])
            for key, count in summary["first_encounter_counts"].items():
                w.writerow([key, count, summary["encounter_tol"]])
        written.append(path)

    if plots and "regret_per_epoch" in summary:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            return written
        per = summary["regret_per_epoch"]
        epochs = [e["epoch"] for e in per]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(epochs, [e["regret_q50"] for e in per], label="median regret")
        ax.fill_between(epochs, [e["regret_q25"] for e in per],
                        [e["regret_q75"] for e in per], alpha=0.3, label="IQR")
        ax.set_xlabel("epoch")
        ax.set_ylabel("regret")
        ax.set_yscale("log")
        ax.set_title(f"{cfg.strategy} on {cfg.objective}")
        ax.legend()
        fig.tight_layout()
        plot_path = out / "regret_curve.png"
        fig.savefig(plot_path, dpi=120)
        plt.close(fig)
        written.append(plot_path)
    return written
