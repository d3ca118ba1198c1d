"""Bootstrap targets and epsilon-greedy action selection.

``standard`` targets bootstrap each level from its own values; ``max_levels``
maximises over all levels up to the trained one, which can pull better-known
coarse values into fine levels early in training and is sample-wise never
below the standard target.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..models.qset import QValueSet, greedy_actions

TARGET_MODES = ("standard", "max_levels")


def level_bootstrap_values(qset: QValueSet, mode: str = "standard") -> np.ndarray:
    """Per-level greedy bootstrap values for a batch of next states: [B, L].

    Control levels use max over actions; multi-agent levels use the joint
    value of per-group maxes (mean over non-empty groups). ``max_levels``
    takes the running max over levels."""
    if mode not in TARGET_MODES:
        raise ConfigError(f"unknown target mode {mode!r}")
    cols = []
    for l in range(qset.n_levels):
        if qset.multi_agent:
            occ = qset.occupied[l]
            best = qset.q[l].max(axis=2)
            cols.append((best * occ).sum(axis=1) / np.maximum(occ.sum(axis=1), 1))
        else:
            cols.append(qset.q[l].max(axis=1))
    vals = np.stack(cols, axis=1)
    if mode == "max_levels":
        vals = np.maximum.accumulate(vals, axis=1)
    return vals


def compute_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    bootstrap: np.ndarray,
    gamma: float,
    level: int,
    tags: np.ndarray,
    n_steps: np.ndarray | None = None,
) -> np.ndarray:
    """Targets for one level: r + gamma**n * bootstrap, dropped on terminals.

    ``bootstrap`` is the [B, L] output of level_bootstrap_values (already in
    standard or max_levels form); ``rewards`` carries 1-step rewards or n-step
    partial returns with ``n_steps`` giving each sample's bootstrap horizon.
    Raises when asked for a level below a sample's behaviour tag."""
    if np.any(tags > level):
        raise ConfigError(f"target level {level} below a sample's behaviour tag")
    n = np.ones_like(rewards) if n_steps is None else n_steps
    cont = np.where(dones, 0.0, gamma**n)
    return rewards + cont * bootstrap[:, level]


def epsilon_greedy_control(
    qset: QValueSet, level: int, epsilon: float, rng: np.random.Generator
) -> int:
    """Single-state action choice at a level: uniform with probability eps,
    else greedy (lowest id on ties)."""
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigError("epsilon must be in [0, 1]")
    n_actions = qset.q[level].shape[1]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(greedy_actions(qset, level)[0])


def epsilon_greedy_groups(
    qset: QValueSet, level: int, epsilon: float, rng: np.random.Generator
) -> np.ndarray:
    """Per-group order choice for a single state: each non-empty group
    explores independently with probability eps. Empty groups return -1."""
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigError("epsilon must be in [0, 1]")
    greedy = greedy_actions(qset, level)[0]
    occ = qset.occupied[level][0]
    n_orders = qset.q[level].shape[2]
    orders = greedy.copy()
    for g in range(len(orders)):
        if occ[g] and rng.random() < epsilon:
            orders[g] = rng.integers(n_orders)
    return orders
