"""Per-level action values from one forward pass.

Two composition modes:
  composed: q[0] = base + deltas[0]; q[l] = q[l-1] gathered through the parent
            map + deltas[l]. The base is a state value in the multi-agent
            setting and zero for single-agent control.
  sep_q:    q[l] = base + deltas[l] at every level (no cross-level transfer).

The identities are structural: they hold bit-exactly for the arrays stored
here because q is literally computed as that sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, UsageError

MODES = ("composed", "sep_q")


@dataclass
class QValueSet:
    """Action values per level.

    Control: q[l] and deltas[l] are [B, |A_l|]; vhat and occupied are None.
    Multi-agent: q[l] and deltas[l] are [B, G_l, n_orders]; vhat is [B];
    occupied[l] is a [B, G_l] bool mask of non-empty groups.
    ``levels`` are the exposed hierarchy/tree level labels.
    """

    q: list[np.ndarray]
    deltas: list[np.ndarray]
    levels: list[int]
    mode: str = "composed"
    vhat: np.ndarray | None = None
    occupied: list[np.ndarray] | None = None

    @property
    def n_levels(self) -> int:
        return len(self.q)

    @property
    def multi_agent(self) -> bool:
        return self.vhat is not None


def compose_control_q(
    deltas: list[np.ndarray], parent_maps: list[np.ndarray | None], mode: str = "composed"
) -> list[np.ndarray]:
    """Stack per-level deltas into per-level Q arrays for the control setting."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    qs = [deltas[0]]
    for l in range(1, len(deltas)):
        if mode == "composed":
            qs.append(qs[-1][:, parent_maps[l]] + deltas[l])
        else:
            qs.append(deltas[l])
    return qs


def greedy_actions(qset: QValueSet, level: int) -> np.ndarray:
    """Argmax at a level (index into qset.levels); ties take the lowest id.

    Control: [B] action ids. Multi-agent: [B, G] order ids, -1 for empty
    groups (mean mixing makes the joint argmax decompose per group).
    """
    if not (0 <= level < qset.n_levels):
        raise ConfigError(f"level index {level} out of range")
    if not qset.multi_agent:
        return qset.q[level].argmax(axis=1)
    best = qset.q[level].argmax(axis=2)
    return np.where(qset.occupied[level], best, -1)


def joint_value(qset: QValueSet, level: int, chosen: np.ndarray | None = None) -> np.ndarray:
    """Joint action value at a level: the mean of the chosen group-action
    values over non-empty groups (empty groups are excluded).

    ``chosen`` is a [B, G] order index per group (-1 allowed on empty groups);
    None means the per-group greedy choice. Single-agent: the chosen action's
    value. Raises if a row has no occupied group.
    """
    if not (0 <= level < qset.n_levels):
        raise ConfigError(f"level index {level} out of range")
    if not qset.multi_agent:
        if chosen is None:
            return qset.q[level].max(axis=1)
        return np.take_along_axis(qset.q[level], chosen[:, None], axis=1)[:, 0]
    occ = qset.occupied[level]
    if np.any(~occ.any(axis=1)):
        raise UsageError("joint_value with all groups empty")
    if chosen is None:
        vals = qset.q[level].max(axis=2)
    else:
        idx = np.where(chosen < 0, 0, chosen)
        vals = np.take_along_axis(qset.q[level], idx[:, :, None], axis=2)[:, :, 0]
    return (vals * occ).sum(axis=1) / occ.sum(axis=1)
