"""Hierarchical k-means partition of unit positions into a balanced group tree.

Level 0 holds the whole team in one group; each group splits into k (default 2)
children at the next level, so level l has up to 2**l groups. Group ids are
positional child-index paths (children of group g are 2g and 2g+1), which keeps
one-hot encodings stable across timesteps. Centroids warm-start from the
previous timestep's tree so group semantics stay approximately consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LLOYD_MAX_ITER = 20


def _farthest_first_init(positions: np.ndarray, k: int) -> np.ndarray:
    """Deterministic cold start: the max-distance pair, then greedy farthest
    points. Ties resolve to the lowest index."""
    n = len(positions)
    if n == 1:
        return np.repeat(positions, k, axis=0)
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    chosen = [min(i, j), max(i, j)]
    while len(chosen) < k:
        mind = d2[:, chosen].min(axis=1)
        mind[chosen] = -1.0
        chosen.append(int(np.argmax(mind)))
    return positions[chosen[:k]].astype(float).copy()


def split_group(
    positions: np.ndarray,
    k: int = 2,
    warm_centroids: np.ndarray | None = None,
    max_iter: int = LLOYD_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm over the rows of ``positions``.

    Returns (labels in [0, k), centroids [k, 2]). Assignment ties go to the
    lower centroid index; a cluster left empty keeps its previous centroid.
    Convergence = no assignment changed, capped at ``max_iter`` iterations.
    """
    positions = np.asarray(positions, dtype=float)
    if k < 2:
        raise ConfigError("k must be >= 2")
    if positions.ndim != 2 or len(positions) == 0:
        raise ConfigError("positions must be a non-empty [n, d] array")
    if warm_centroids is not None and np.all(np.isfinite(warm_centroids)):
        centroids = np.asarray(warm_centroids, dtype=float).copy()
        if centroids.shape != (k, positions.shape[1]):
            raise ConfigError("warm centroids shape mismatch")
    else:
        centroids = _farthest_first_init(positions, k)
    labels = None
    for _ in range(max_iter):
        d2 = np.square(positions[:, None, :] - centroids[None, :, :]).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if mask.any():
                centroids[c] = positions[mask].mean(axis=0)
    return labels, centroids


@dataclass
class GroupTree:
    """Per-timestep hierarchical clustering of alive unit ids.

    ``assignment[l, i]`` is the group index of ``unit_ids[i]`` at level l;
    ``centroids[l]`` has one row per group slot (2**l of them, NaN when the
    slot has never been occupied)."""

    depth: int
    unit_ids: np.ndarray            # sorted alive unit ids
    assignment: np.ndarray          # [depth+1, n_units] int
    centroids: list[np.ndarray]     # per level [2**l, 2]

    def __post_init__(self):
        self._index = {int(u): i for i, u in enumerate(self.unit_ids)}

    def n_groups(self, level: int) -> int:
        return 2**level

    def group_of(self, level: int, unit_id: int) -> int:
        if not (0 <= level <= self.depth):
            raise ConfigError(f"level {level} out of range [0, {self.depth}]")
        if unit_id not in self._index:
            raise KeyError(f"unit {unit_id} not in tree")
        return int(self.assignment[level, self._index[unit_id]])

    def members(self, level: int, group: int) -> np.ndarray:
        return self.unit_ids[self.assignment[level] == group]

    def occupied(self, level: int) -> np.ndarray:
        occ = np.zeros(self.n_groups(level), dtype=bool)
        occ[np.unique(self.assignment[level])] = True
        return occ


def build_group_tree(
    unit_ids: np.ndarray,
    positions: np.ndarray,
    depth: int,
    previous: GroupTree | None = None,
) -> GroupTree:
    """Recursive k=2 splits down to ``depth``; warm-starts each node's
    centroids from the corresponding node of ``previous`` when available."""
    order = np.argsort(unit_ids)
    unit_ids = np.asarray(unit_ids)[order]
    positions = np.asarray(positions, dtype=float)[order]
    n = len(unit_ids)
    if n == 0:
        raise ConfigError("need at least one alive unit")
    if positions.shape != (n, 2):
        raise ConfigError("positions must be [n, 2]")
    if previous is not None and previous.depth != depth:
        raise ConfigError("previous tree depth mismatch")
    assignment = np.zeros((depth + 1, n), dtype=np.int64)
    centroids = [np.full((2**l, 2), np.nan) for l in range(depth + 1)]
    centroids[0][0] = positions.mean(axis=0)
    for l in range(1, depth + 1):
        for parent in range(2 ** (l - 1)):
            mask = assignment[l - 1] == parent
            if not mask.any():
                continue
            warm = None
            if previous is not None:
                cand = previous.centroids[l][2 * parent : 2 * parent + 2]
                if np.all(np.isfinite(cand)):
                    warm = cand
            labels, cents = split_group(positions[mask], k=2, warm_centroids=warm)
            assignment[l, mask] = 2 * parent + labels
            centroids[l][2 * parent : 2 * parent + 2] = cents
    return GroupTree(depth=depth, unit_ids=unit_ids, assignment=assignment, centroids=centroids)
