"""Shared-encoder value network for discretised control.

Two encoder layers feed a chain of per-level refinement layers; each level's
evaluation layer emits a residual score vector over that level's actions, and
per-level Q values are built by adding each residual to the parent action's
value one level down. There is no separate state-value head here: level 0's
Q is its residual directly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..hierarchy import ActionHierarchy
from ..nets import DenseNet, snapshot
from .qset import MODES, QValueSet, compose_control_q

ENCODER_WIDTHS = (128, 64)
HEAD_WIDTH = 64
DELTA_INIT_SCALE = 0.01


class ControlValueModel:
    def __init__(
        self,
        hierarchy: ActionHierarchy,
        feature_dim: int,
        mode: str = "composed",
        rng: np.random.Generator | None = None,
        dtype=np.float32,
        encoder_widths: tuple[int, int] = ENCODER_WIDTHS,
        head_width: int = HEAD_WIDTH,
    ):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        rng = rng or np.random.default_rng()
        self.hierarchy = hierarchy
        self.mode = mode
        self.feature_dim = feature_dim
        self.levels = list(range(hierarchy.n_levels))
        self.encoder = DenseNet(
            [feature_dim, *encoder_widths],
            output_activation="relu",
            rng=rng,
            dtype=dtype,
        )
        emb = encoder_widths[-1]
        self.refine: list[DenseNet] = []
        self.evaluators: list[DenseNet] = []
        for l in self.levels:
            self.refine.append(
                DenseNet([emb, head_width], output_activation="relu", rng=rng, dtype=dtype)
            )
            # residual heads start near zero so each level initially inherits
            # its parent's values
            self.evaluators.append(
                DenseNet(
                    [head_width, hierarchy.size(l)],
                    rng=rng,
                    dtype=dtype,
                    final_scale=DELTA_INIT_SCALE,
                )
            )
            emb = head_width
        self._parent_maps: list[np.ndarray | None] = [None] + [
            hierarchy.parents[l] for l in range(1, hierarchy.n_levels)
        ]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def subnets(self) -> list[DenseNet]:
        return [self.encoder, *self.refine, *self.evaluators]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for net in self.subnets():
            out.extend(net.parameters())
        return out

    def forward(self, x: np.ndarray, remember: bool = False) -> QValueSet:
        h = self.encoder.forward(x, remember=remember)
        deltas = []
        for l in range(self.n_levels):
            h = self.refine[l].forward(h, remember=remember)
            deltas.append(self.evaluators[l].forward(h, remember=remember))
        qs = compose_control_q(deltas, self._parent_maps, self.mode)
        return QValueSet(q=qs, deltas=deltas, levels=self.levels, mode=self.mode)

    def backward(self, dq: list[np.ndarray]) -> list[np.ndarray]:
        """Gradients of a scalar loss given dL/dq per level, aligned with
        parameters(). Requires the matching forward(remember=True)."""
        n = self.n_levels
        if len(dq) != n:
            raise ConfigError("need one q-gradient per level")
        # composition: accumulate child-level gradients onto parent entries
        d_delta: list[np.ndarray] = [None] * n  # type: ignore[list-item]
        if self.mode == "composed":
            g = np.zeros_like(dq[n - 1])
            for l in range(n - 1, -1, -1):
                g = g + dq[l]
                d_delta[l] = g
                if l > 0:
                    parents = self._parent_maps[l]
                    n_par = self.hierarchy.size(l - 1)
                    if np.array_equal(parents, np.arange(len(parents)) // 2):
                        # dyadic id layout: children of p sit at 2p, 2p+1
                        g = g.reshape(g.shape[0], n_par, 2).sum(axis=2)
                    else:
                        scatter = np.zeros((g.shape[0], n_par), dtype=g.dtype)
                        np.add.at(scatter.T, parents, g.T)
                        g = scatter
        else:
            d_delta = list(dq)
        # heads and refinement chain, deepest level first
        eval_grads: list[list[np.ndarray]] = [None] * n  # type: ignore[list-item]
        refine_grads: list[list[np.ndarray]] = [None] * n  # type: ignore[list-item]
        dh = None
        for l in range(n - 1, -1, -1):
            eg, dh_eval = self.evaluators[l].backward(d_delta[l])
            eval_grads[l] = eg
            dh = dh_eval if dh is None else dh + dh_eval
            rg, dh = self.refine[l].backward(dh)
            refine_grads[l] = rg
        enc_grads, _ = self.encoder.backward(dh)
        out = list(enc_grads)
        for rg in refine_grads:
            out.extend(rg)
        for eg in eval_grads:
            out.extend(eg)
        return out

    def clone(self) -> "ControlValueModel":
        dup = object.__new__(ControlValueModel)
        dup.hierarchy = self.hierarchy
        dup.mode = self.mode
        dup.feature_dim = self.feature_dim
        dup.levels = list(self.levels)
        dup.encoder = snapshot(self.encoder)
        dup.refine = [snapshot(r) for r in self.refine]
        dup.evaluators = [snapshot(e) for e in self.evaluators]
        dup._parent_maps = self._parent_maps
        return dup
