"""Experiment orchestration: run every seed of a config, persist per-seed
metrics and checkpoints, and write the multi-seed aggregate."""

from __future__ import annotations

import os

from ..models.checkpoint import save_checkpoint
from .config import ExperimentConfig
from .metrics import aggregate_rows, write_aggregate_csv, write_metrics_csv


def seed_paths(cfg: ExperimentConfig, seed: int) -> tuple[str, str]:
    base = os.path.join(cfg.out_dir, f"{cfg.run_name}_seed{seed}")
    return base + ".csv", base + ".ckpt"


def aggregate_path(cfg: ExperimentConfig) -> str:
    return os.path.join(cfg.out_dir, f"{cfg.run_name}_aggregate.csv")


def _run_one_seed(cfg: ExperimentConfig, seed: int):
    # imported lazily so that worker processes pay the cost once
    from ..training.control_loop import run_control_training
    from ..training.micro_loop import run_microbattle_training

    if cfg.is_control:
        rows, trainer = run_control_training(cfg.control_config(), seed)
    else:
        rows, trainer = run_microbattle_training(cfg.micro_config(), seed)
    csv_path, ckpt_path = seed_paths(cfg, seed)
    write_metrics_csv(rows, csv_path)
    save_checkpoint(
        ckpt_path,
        trainer.model,
        meta={"task": cfg.task, "algorithm": cfg.algorithm, "seed": seed,
              "config": cfg.run_name},
    )
    return rows


def run_experiment(cfg: ExperimentConfig, parallel_seeds: int = 1) -> dict:
    """Run all seeds (serially or in a process pool), then aggregate.

    Returns a summary dict with file paths and final smoothed metrics."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    seeds = list(cfg.seeds)
    if parallel_seeds > 1 and len(seeds) > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(min(parallel_seeds, len(seeds))) as pool:
            per_seed = pool.starmap(_run_one_seed, [(cfg, s) for s in seeds])
    else:
        per_seed = [_run_one_seed(cfg, s) for s in seeds]
    eval_only = not cfg.is_control
    agg = aggregate_rows(per_seed, window=cfg.window, eval_only=eval_only)
    agg_path = aggregate_path(cfg)
    write_aggregate_csv(agg, agg_path)
    last = agg[-1]
    return {
        "config": cfg.run_name,
        "seed_files": [seed_paths(cfg, s)[0] for s in seeds],
        "checkpoints": [seed_paths(cfg, s)[1] for s in seeds],
        "aggregate": agg_path,
        "final_return_ma": last["return_ma_mean"],
        "final_success_ma": last["success_ma_mean"],
        "episodes": last["x"] + 1,
    }
