"""Tabular ground truth: small MDPs over an action hierarchy and exact value
iteration per level, including the multi-level bootstrap variant.

Transition and reward tables are indexed by ids of the hierarchy's deepest
level; a level-l problem restricts the argmax to the lifted ids of A_l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hierarchy import ActionHierarchy


@dataclass
class TabularMDP:
    hierarchy: ActionHierarchy
    transitions: np.ndarray  # [S, A_top, S] row-stochastic
    rewards: np.ndarray      # [S, A_top]
    gamma: float

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    def __post_init__(self):
        s, a, s2 = self.transitions.shape
        if s != s2 or s < 1:
            raise ConfigError("transition tensor must be [S, A, S]")
        if a != self.hierarchy.size(self.hierarchy.n_levels - 1):
            raise ConfigError("action axis must match the deepest level")
        if self.rewards.shape != (s, a):
            raise ConfigError("reward table must be [S, A]")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError("gamma must be in (0, 1)")
        rowsums = self.transitions.sum(axis=2)
        if np.max(np.abs(rowsums - 1.0)) > 1e-12:
            raise ConfigError("transition rows must sum to 1 within 1e-12")
        if not np.all(np.isfinite(self.rewards)):
            raise ConfigError("rewards must be finite")


def random_mdp(
    n_states: int, hierarchy: ActionHierarchy, rng: np.random.Generator, gamma: float = 0.9
) -> TabularMDP:
    """Dirichlet transition rows and uniform [-1, 1] rewards.

    The hierarchy constrains which actions a level may use, not the dynamics:
    parent and child actions get independent rows.
    """
    if n_states < 1:
        raise ConfigError("need at least one state")
    n_actions = hierarchy.size(hierarchy.n_levels - 1)
    p = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    r = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    return TabularMDP(hierarchy=hierarchy, transitions=p, rewards=r, gamma=gamma)


def _level_slices(mdp: TabularMDP, level: int) -> tuple[np.ndarray, np.ndarray]:
    top = mdp.hierarchy.n_levels - 1
    ids = mdp.hierarchy.lift_ids(level, top)
    return mdp.rewards[:, ids], mdp.transitions[:, ids, :]


def value_iteration(
    mdp: TabularMDP, level: int, tol: float = 1e-10, max_sweeps: int = 100_000
) -> tuple[np.ndarray, np.ndarray]:
    """Exact Q*_level by synchronous sweeps of the Bellman optimality operator
    restricted to A_level. Stops when the sup-norm change drops below
    tol * (1 - gamma) / gamma, which bounds the remaining error by tol.

    Returns (Q [S, |A_level|], V [S]).
    """
    if tol <= 0:
        raise ConfigError("tolerance must be > 0")
    r, p = _level_slices(mdp, level)
    gamma = mdp.gamma
    q = np.zeros_like(r)
    thresh = tol * (1.0 - gamma) / gamma
    for _ in range(max_sweeps):
        v = q.max(axis=1)
        q_next = r + gamma * (p @ v)
        delta = np.max(np.abs(q_next - q))
        q = q_next
        if delta < thresh:
            break
    return q, q.max(axis=1)


def modified_value_iteration(
    mdp: TabularMDP,
    up_to_level: int,
    tol: float = 1e-10,
    max_sweeps: int = 100_000,
    init: list[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Jointly iterate levels 0..up_to_level with the multi-level bootstrap
    target r + gamma * max_{i <= l} max_a Q_i(s', a).

    The extra inner max is redundant at the fixed point, so the converged
    tables match per-level value_iteration; mid-iteration the operators can
    differ, which is why an ``init`` is accepted. Returns one Q table per level.
    """
    if tol <= 0:
        raise ConfigError("tolerance must be > 0")
    levels = list(range(up_to_level + 1))
    slices = [_level_slices(mdp, l) for l in levels]
    if init is None:
        qs = [np.zeros_like(r) for r, _ in slices]
    else:
        if len(init) != len(levels):
            raise ConfigError("init must supply one table per level")
        qs = [q.copy() for q in init]
    gamma = mdp.gamma
    thresh = tol * (1.0 - gamma) / gamma
    for _ in range(max_sweeps):
        v = np.stack([q.max(axis=1) for q in qs])          # [L, S]
        v_best = np.maximum.accumulate(v, axis=0)          # max over i <= l
        delta = 0.0
        for j, (r, p) in enumerate(slices):
            q_next = r + gamma * (p @ v_best[j])
            delta = max(delta, float(np.max(np.abs(q_next - qs[j]))))
            qs[j] = q_next
        if delta < thresh:
            break
    return qs


def check_monotonicity(
    n_mdps: int,
    n_states: int = 8,
    max_level: int = 2,
    seed: int = 0,
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """V*_i <= V*_j for i < j over randomly generated MDPs.

    Returns (all held, worst violation found)."""
    from .hierarchy import build_force_ladder

    rng = np.random.default_rng(seed)
    h = build_force_ladder(max_level)
    worst = 0.0
    for _ in range(n_mdps):
        gamma = float(rng.uniform(0.5, 0.95))
        mdp = random_mdp(n_states, h, rng, gamma=gamma)
        values = [value_iteration(mdp, l)[1] for l in range(max_level + 1)]
        for i in range(max_level):
            worst = max(worst, float(np.max(values[i] - values[i + 1])))
    return worst <= tol, worst


def check_fixed_point_equivalence(
    n_mdps: int,
    n_states: int = 8,
    max_level: int = 2,
    seed: int = 0,
    tol: float = 1e-6,
) -> tuple[bool, float]:
    """Modified and per-level standard value iteration agree at the fixed point.

    Returns (all within tol, worst sup-norm gap)."""
    from .hierarchy import build_force_ladder

    rng = np.random.default_rng(seed)
    h = build_force_ladder(max_level)
    worst = 0.0
    for _ in range(n_mdps):
        gamma = float(rng.uniform(0.5, 0.95))
        mdp = random_mdp(n_states, h, rng, gamma=gamma)
        joint = modified_value_iteration(mdp, max_level)
        for l in range(max_level + 1):
            q_std, _ = value_iteration(mdp, l)
            worst = max(worst, float(np.max(np.abs(joint[l] - q_std))))
    return worst <= tol, worst
