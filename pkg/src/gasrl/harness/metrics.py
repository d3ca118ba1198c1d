"""Metrics rows, CSV persistence, and multi-seed aggregation.

One row per finished episode. Floats are written with repr so that reruns of
a deterministic trainer produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

CSV_FIELDS = (
    "episode",
    "env_steps",
    "model_updates",
    "alpha",
    "level",
    "ep_return",
    "success",
    "epsilon",
    "mean_loss",
    "wall_clock_s",
)


@dataclass
class MetricsRow:
    episode: int
    env_steps: int
    model_updates: int
    alpha: float
    level: int
    ep_return: float
    success: bool
    epsilon: float
    mean_loss: float
    wall_clock_s: float


def write_metrics_csv(rows: list[MetricsRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_FIELDS)
        for r in rows:
            w.writerow(
                [
                    r.episode,
                    r.env_steps,
                    r.model_updates,
                    repr(r.alpha),
                    r.level,
                    repr(r.ep_return),
                    int(r.success),
                    repr(r.epsilon),
                    repr(r.mean_loss),
                    repr(r.wall_clock_s),
                ]
            )


def read_metrics_csv(path: str) -> list[MetricsRow]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
            raise ConfigError(f"{path}: unexpected metrics header {reader.fieldnames}")
        for rec in reader:
            rows.append(
                MetricsRow(
                    episode=int(rec["episode"]),
                    env_steps=int(rec["env_steps"]),
                    model_updates=int(rec["model_updates"]),
                    alpha=float(rec["alpha"]),
                    level=int(rec["level"]),
                    ep_return=float(rec["ep_return"]),
                    success=bool(int(rec["success"])),
                    epsilon=float(rec["epsilon"]),
                    mean_loss=float(rec["mean_loss"]),
                    wall_clock_s=float(rec["wall_clock_s"]),
                )
            )
    return rows


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean with an expanding head: element i averages the last
    min(window, i+1) values."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    out = np.empty(len(values), dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(values, dtype=float)])
    for i in range(len(values)):
        lo = max(0, i + 1 - window)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


AGGREGATE_FIELDS = (
    "x",
    "env_steps",
    "model_updates",
    "return_ma_mean",
    "return_ma_stderr",
    "success_ma_mean",
    "success_ma_stderr",
    "n_seeds",
)


def aggregate_rows(
    per_seed: list[list[MetricsRow]], window: int, eval_only: bool = False
) -> list[dict]:
    """Per-x-point mean and standard error over seeds of the smoothed return
    and success rate.

    Rows align on episode ordinal (after optionally filtering to evaluation
    episodes, identified by epsilon == 0), truncated to the shortest seed.
    Smoothing runs per seed before aggregation. stderr uses ddof=1 and is 0
    for a single seed.
    """
    if not per_seed:
        raise ConfigError("no seed data to aggregate")
    series = []
    for rows in per_seed:
        if eval_only:
            rows = [r for r in rows if r.epsilon == 0.0]
        if not rows:
            raise ConfigError("a seed has no rows after filtering")
        series.append(rows)
    n_points = min(len(rows) for rows in series)
    ret = np.array([[r.ep_return for r in rows[:n_points]] for rows in series])
    suc = np.array([[float(r.success) for r in rows[:n_points]] for rows in series])
    env_steps = np.array([[r.env_steps for r in rows[:n_points]] for rows in series])
    updates = np.array([[r.model_updates for r in rows[:n_points]] for rows in series])
    ret_ma = np.stack([moving_average(r, window) for r in ret])
    suc_ma = np.stack([moving_average(s, window) for s in suc])
    n = len(series)

    def stderr(a: np.ndarray) -> np.ndarray:
        if n == 1:
            return np.zeros(a.shape[1])
        return a.std(axis=0, ddof=1) / math.sqrt(n)

    ret_se, suc_se = stderr(ret_ma), stderr(suc_ma)
    out = []
    for i in range(n_points):
        out.append(
            {
                "x": i,
                "env_steps": float(env_steps[:, i].mean()),
                "model_updates": float(updates[:, i].mean()),
                "return_ma_mean": float(ret_ma[:, i].mean()),
                "return_ma_stderr": float(ret_se[i]),
                "success_ma_mean": float(suc_ma[:, i].mean()),
                "success_ma_stderr": float(suc_se[i]),
                "n_seeds": n,
            }
        )
    return out


def write_aggregate_csv(agg: list[dict], path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(AGGREGATE_FIELDS)
        for rec in agg:
            w.writerow(
                [
                    rec["x"],
                    repr(rec["env_steps"]),
                    repr(rec["model_updates"]),
                    repr(rec["return_ma_mean"]),
                    repr(rec["return_ma_stderr"]),
                    repr(rec["success_ma_mean"]),
                    repr(rec["success_ma_stderr"]),
                    rec["n_seeds"],
                ]
            )


def read_aggregate_csv(path: str) -> list[dict]:
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != AGGREGATE_FIELDS:
            raise ConfigError(f"{path}: unexpected aggregate header {reader.fieldnames}")
        for rec in reader:
            out.append(
                {
                    "x": int(rec["x"]),
                    "env_steps": float(rec["env_steps"]),
                    "model_updates": float(rec["model_updates"]),
                    "return_ma_mean": float(rec["return_ma_mean"]),
                    "return_ma_stderr": float(rec["return_ma_stderr"]),
                    "success_ma_mean": float(rec["success_ma_mean"]),
                    "success_ma_stderr": float(rec["success_ma_stderr"]),
                    "n_seeds": int(rec["n_seeds"]),
                }
            )
    return out
