"""Permutation-invariant value network for grouped multi-agent control.

Every unit's feature vector runs through a shared MLP; the state embedding is
the mean over all alive units (both teams) and feeds a state-value head. For
each exposed tree level, a masked mean over each group's member embeddings is
concatenated with the state embedding and decoded by that level's evaluator
MLP into a residual score per order. Group-action values are built iteratively
from the state value: level 0's value is vhat + its residual, and each deeper
level adds its residual to the value of the parent group taking the same
order. Outputs are invariant to unit ordering by construction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, UsageError
from ..nets import DenseNet, snapshot
from .qset import MODES, QValueSet

N_ORDERS = 17
UNIT_EMBED_WIDTHS = (128, 64)
VALUE_HEAD_WIDTH = 64
EVAL_WIDTH = 64
DELTA_INIT_SCALE = 0.01


class MultiAgentValueModel:
    """``exposed_levels`` selects which tree levels own value heads: all of
    0..depth for the growing curriculum, or a single level for from-scratch
    baselines. Consecutive exposed levels are bridged through tree ancestry."""

    def __init__(
        self,
        tree_depth: int,
        feature_dim: int,
        exposed_levels: list[int] | None = None,
        n_orders: int = N_ORDERS,
        mode: str = "composed",
        rng: np.random.Generator | None = None,
        dtype=np.float32,
        embed_widths: tuple[int, int] = UNIT_EMBED_WIDTHS,
        eval_width: int = EVAL_WIDTH,
    ):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        exposed = list(range(tree_depth + 1)) if exposed_levels is None else list(exposed_levels)
        if not exposed or exposed != sorted(exposed) or len(set(exposed)) != len(exposed):
            raise ConfigError("exposed_levels must be strictly increasing and non-empty")
        if exposed[0] < 0 or exposed[-1] > tree_depth:
            raise ConfigError("exposed_levels outside [0, tree_depth]")
        rng = rng or np.random.default_rng()
        self.tree_depth = tree_depth
        self.feature_dim = feature_dim
        self.levels = exposed
        self.n_orders = n_orders
        self.mode = mode
        emb = embed_widths[-1]
        self.unit_net = DenseNet(
            [feature_dim, *embed_widths], output_activation="relu", rng=rng, dtype=dtype
        )
        self.value_head = DenseNet([emb, VALUE_HEAD_WIDTH, 1], rng=rng, dtype=dtype)
        self.evaluators = [
            DenseNet(
                [2 * emb, eval_width, n_orders],
                rng=rng,
                dtype=dtype,
                final_scale=DELTA_INIT_SCALE,
            )
            for _ in exposed
        ]
        self._emb_dim = emb
        self._cache = None

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def n_groups(self, level_index: int) -> int:
        return 2 ** self.levels[level_index]

    def subnets(self) -> list[DenseNet]:
        return [self.unit_net, self.value_head, *self.evaluators]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for net in self.subnets():
            out.extend(net.parameters())
        return out

    def forward(
        self,
        features: np.ndarray,   # [B, U, F]
        alive: np.ndarray,      # [B, U] bool
        group_index: np.ndarray,  # [B, tree_depth+1, U] int, -1 for enemies/dead
        remember: bool = False,
    ) -> QValueSet:
        features = np.asarray(features)
        alive = np.asarray(alive, dtype=bool)
        if features.ndim != 3 or features.shape[2] != self.feature_dim:
            raise ConfigError(f"features must be [B, U, {self.feature_dim}]")
        b, u, f = features.shape
        if alive.shape != (b, u) or group_index.shape != (b, self.tree_depth + 1, u):
            raise ConfigError("alive/group_index shapes do not match features")
        n_alive = alive.sum(axis=1)
        if np.any(n_alive == 0):
            raise UsageError("forward on a state with no alive units")

        emb = self.unit_net.forward(features.reshape(b * u, f), remember=remember)
        emb = emb.reshape(b, u, self._emb_dim)
        alive_f = alive.astype(emb.dtype)
        state_emb = (emb * alive_f[:, :, None]).sum(axis=1) / n_alive[:, None]
        vhat = self.value_head.forward(state_emb, remember=remember)[:, 0]

        deltas: list[np.ndarray] = []
        occupied: list[np.ndarray] = []
        masks: list[np.ndarray] = []
        counts: list[np.ndarray] = []
        for j, lvl in enumerate(self.levels):
            g = 2**lvl
            member = (group_index[:, lvl, :][:, None, :] == np.arange(g)[None, :, None]) & alive[
                :, None, :
            ]
            m = member.astype(emb.dtype)                       # [B, G, U]
            cnt = m.sum(axis=2)                                # [B, G]
            occ = cnt > 0
            safe = np.maximum(cnt, 1.0)
            group_emb = (m @ emb) / safe[:, :, None]           # [B, G, E]
            eval_in = np.concatenate(
                [group_emb, np.broadcast_to(state_emb[:, None, :], group_emb.shape)], axis=2
            )
            d = self.evaluators[j].forward(
                eval_in.reshape(b * g, 2 * self._emb_dim), remember=remember
            )
            deltas.append(d.reshape(b, g, self.n_orders))
            occupied.append(occ)
            masks.append(m)
            counts.append(safe)

        qs: list[np.ndarray] = []
        for j in range(self.n_levels):
            if j == 0 or self.mode == "sep_q":
                qs.append(vhat[:, None, None] + deltas[j])
            else:
                shift = self.levels[j] - self.levels[j - 1]
                parents = np.arange(2 ** self.levels[j]) >> shift
                qs.append(qs[j - 1][:, parents, :] + deltas[j])
        if remember:
            self._cache = dict(
                b=b, u=u, alive_f=alive_f, n_alive=n_alive, masks=masks, counts=counts
            )
        return QValueSet(
            q=qs, deltas=deltas, levels=self.levels, mode=self.mode, vhat=vhat, occupied=occupied
        )

    def backward(self, dq: list[np.ndarray]) -> list[np.ndarray]:
        """Gradients given dL/dq per exposed level; needs forward(remember=True)."""
        if self._cache is None:
            raise UsageError("backward called without a remembered forward pass")
        if len(dq) != self.n_levels:
            raise ConfigError("need one q-gradient per exposed level")
        c = self._cache
        b, u = c["b"], c["u"]
        # composition: push child-level gradients onto parents, collect
        # per-level residual grads and the state-value grad
        d_delta: list[np.ndarray] = [None] * self.n_levels  # type: ignore[list-item]
        dvhat = np.zeros(b)
        if self.mode == "composed":
            g = np.zeros_like(dq[-1])
            for j in range(self.n_levels - 1, -1, -1):
                g = g + dq[j]
                d_delta[j] = g
                if j > 0:
                    shift = self.levels[j] - self.levels[j - 1]
                    gp = g.reshape(b, 2 ** self.levels[j - 1], 2**shift, self.n_orders)
                    g = gp.sum(axis=2)
                else:
                    dvhat = g.sum(axis=(1, 2))
        else:
            for j in range(self.n_levels):
                d_delta[j] = dq[j]
                dvhat = dvhat + dq[j].sum(axis=(1, 2))

        d_emb = np.zeros((b, u, self._emb_dim))
        d_state = np.zeros((b, self._emb_dim))
        eval_grads: list[list[np.ndarray]] = [None] * self.n_levels  # type: ignore[list-item]
        for j in range(self.n_levels - 1, -1, -1):
            g_count = d_delta[j].shape[1]
            eg, d_in = self.evaluators[j].backward(
                d_delta[j].reshape(b * g_count, self.n_orders)
            )
            eval_grads[j] = eg
            d_in = d_in.reshape(b, g_count, 2 * self._emb_dim)
            d_group = d_in[:, :, : self._emb_dim] / c["counts"][j][:, :, None]
            # distribute each group's pooled gradient back to its members
            d_emb += np.einsum("bgu,bge->bue", c["masks"][j], d_group)
            d_state += d_in[:, :, self._emb_dim :].sum(axis=1)

        vh_grads, d_state_v = self.value_head.backward(dvhat[:, None])
        d_state = d_state + d_state_v
        d_emb += c["alive_f"][:, :, None] * (d_state / c["n_alive"][:, None])[:, None, :]
        unit_grads, _ = self.unit_net.backward(d_emb.reshape(b * u, self._emb_dim))

        out = list(unit_grads)
        out.extend(vh_grads)
        for eg in eval_grads:
            out.extend(eg)
        return out

    def clone(self) -> "MultiAgentValueModel":
        dup = object.__new__(MultiAgentValueModel)
        dup.tree_depth = self.tree_depth
        dup.feature_dim = self.feature_dim
        dup.levels = list(self.levels)
        dup.n_orders = self.n_orders
        dup.mode = self.mode
        dup.unit_net = snapshot(self.unit_net)
        dup.value_head = snapshot(self.value_head)
        dup.evaluators = [snapshot(e) for e in self.evaluators]
        dup._emb_dim = self._emb_dim
        dup._cache = None
        return dup
