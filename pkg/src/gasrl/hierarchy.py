"""Nested action spaces with parent maps.

Level 0 is the most restricted set; every level is a subset of the next, and
each action at level l-1 reappears at level l as one of its own children.
Action ids are dense integers per level with an explicit payload table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MAX_FORCE_LEVELS = 8


@dataclass
class ActionHierarchy:
    payloads: list[np.ndarray]           # per level: payload of each action id
    parents: list[np.ndarray | None]     # parents[l][id] -> id at level l-1; None at level 0
    same_child: list[np.ndarray]         # same_child[l][id] -> id of the identical action at level l+1
    _lift_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_levels(self) -> int:
        return len(self.payloads)

    def size(self, level: int) -> int:
        return len(self.payloads[level])

    def _check_level(self, level: int, lo: int = 0) -> None:
        if not (lo <= level < self.n_levels):
            raise ConfigError(f"level {level} out of range [{lo}, {self.n_levels})")

    def parent_of(self, level: int, action_id: int) -> int:
        """Unique parent at level-1; an action shared with level-1 parents to itself."""
        self._check_level(level, lo=1)
        par = self.parents[level]
        if not (0 <= action_id < len(par)):
            raise KeyError(f"unknown action id {action_id} at level {level}")
        return int(par[action_id])

    def ancestor_chain(self, level: int, action_id: int) -> list[int]:
        """Ids from level 0 up to ``level`` related consecutively by parent_of."""
        self._check_level(level)
        if not (0 <= action_id < self.size(level)):
            raise KeyError(f"unknown action id {action_id} at level {level}")
        chain = [action_id]
        for l in range(level, 0, -1):
            chain.append(self.parent_of(l, chain[-1]))
        chain.reverse()
        return chain

    def lift_ids(self, level_from: int, level_to: int) -> np.ndarray:
        """Vectorized id map A_from -> A_to (level_to >= level_from) via same-child links."""
        self._check_level(level_from)
        self._check_level(level_to)
        if level_to < level_from:
            raise ConfigError("lift_ids goes from a lower level to a higher one")
        key = (level_from, level_to)
        if key not in self._lift_cache:
            ids = np.arange(self.size(level_from))
            for l in range(level_from, level_to):
                ids = self.same_child[l][ids]
            self._lift_cache[key] = ids
        return self._lift_cache[key]

    def lift(self, level_from: int, action_id: int, level_to: int) -> int:
        return int(self.lift_ids(level_from, level_to)[action_id])

    def validate(self) -> None:
        """Check parent totality, self-parenting and the subset chain."""
        for l in range(1, self.n_levels):
            par = self.parents[l]
            if par is None or len(par) != self.size(l):
                raise ConfigError(f"parent map at level {l} is not total")
            if np.any((par < 0) | (par >= self.size(l - 1))):
                raise ConfigError(f"parent map at level {l} points outside level {l - 1}")
        for l in range(self.n_levels - 1):
            same = self.same_child[l]
            if len(same) != self.size(l):
                raise ConfigError(f"subset chain broken at level {l}: missing same-child ids")
            for pid, cid in enumerate(same):
                if self.payloads[l + 1][cid] != self.payloads[l][pid]:
                    raise ConfigError(f"same-child {pid}->{cid} changes payload at level {l}")
                if int(self.parents[l + 1][cid]) != pid:
                    raise ConfigError(f"action {pid} at level {l} does not parent itself")

    def dump_table(self) -> str:
        """Plain-text table (level, action id, payload, parent id) for fixtures/docs."""
        lines = ["level\tid\tpayload\tparent"]
        for l in range(self.n_levels):
            for aid in range(self.size(l)):
                parent = "-" if l == 0 else str(self.parent_of(l, aid))
                lines.append(f"{l}\t{aid}\t{self.payloads[l][aid]}\t{parent}")
        return "\n".join(lines)


def build_force_ladder(max_level: int) -> ActionHierarchy:
    """Dyadic ladder of signed force magnitudes.

    A_0 = {+1, -1}; each action a at level l-1 spawns children
    {a, a - sign(a) * 2**-l}, so level l holds the 2**(l+1) signed multiples
    of 2**-l in (0, 1]. Ids: the self-child of parent p is 2p, the new child
    2p+1, which makes the self-parenting relation explicit. Nearest-neighbour
    parenting ties (exact midpoints) resolve toward the larger magnitude,
    which is exactly the constructive parent.
    """
    if not (0 <= max_level <= MAX_FORCE_LEVELS):
        raise ConfigError(f"max_level must be in [0, {MAX_FORCE_LEVELS}]")
    payloads: list[np.ndarray] = [np.array([1.0, -1.0])]
    parents: list[np.ndarray | None] = [None]
    same_child: list[np.ndarray] = []
    for l in range(1, max_level + 1):
        prev = payloads[l - 1]
        cur = np.empty(2 * len(prev))
        par = np.empty(2 * len(prev), dtype=np.int64)
        same = np.empty(len(prev), dtype=np.int64)
        for pid, a in enumerate(prev):
            cur[2 * pid] = a
            cur[2 * pid + 1] = a - np.sign(a) * 2.0 ** (-l)
            par[2 * pid] = pid
            par[2 * pid + 1] = pid
            same[pid] = 2 * pid
        payloads.append(cur)
        parents.append(par)
        same_child.append(same)
    h = ActionHierarchy(payloads=payloads, parents=parents, same_child=same_child)
    h.validate()
    return h


def restrict_to_top(h: ActionHierarchy) -> ActionHierarchy:
    """Single-level view of the largest action set (from-scratch baselines)."""
    return ActionHierarchy(
        payloads=[h.payloads[-1].copy()], parents=[None], same_child=[]
    )


def force_id(h: ActionHierarchy, level: int, force: float) -> int:
    """Id of an exact force payload at a level (dyadic payloads compare exactly)."""
    matches = np.nonzero(h.payloads[level] == force)[0]
    if len(matches) != 1:
        raise KeyError(f"force {force} not present at level {level}")
    return int(matches[0])
