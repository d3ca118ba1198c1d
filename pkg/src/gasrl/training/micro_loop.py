"""n-step queue learner for the multi-agent battles.

Actors roll out episodes at a per-episode behaviour level, push 6-step
segments into a bounded queue, and one learner consumes batches of segments
(removed when consumed). The TD loss is on the joint value at each level at
or above the behaviour tag: the mean over non-empty groups of the chosen
group-action values, VDN-style. Serial mode (workers=1) interleaves acting
and learning deterministically; workers>1 runs actor threads against a
blocking queue.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..curriculum import CurriculumSchedule, alpha_at, sample_level
from ..envs.microbattle import (
    GroupCommand,
    MicroBattle,
    ScenarioConfig,
    battle_features,
    feature_dim,
)
from ..errors import ConfigError
from ..grouping import build_group_tree
from ..harness.metrics import MetricsRow
from ..models.multiagent import MultiAgentValueModel
from ..nets import AdamState, adam_init, adam_step
from .control_loop import linear_epsilon
from .replay import NStepSegment, SegmentQueue, Transition, segment_episode
from .targets import TARGET_MODES, compute_target, epsilon_greedy_groups, level_bootstrap_values


@dataclass
class MicroTrainConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    max_level: int = 2
    scratch: bool = False
    mode: str = "composed"
    off_action_space: bool = True
    target_mode: str = "standard"
    gamma: float = 0.99
    lr: float = 2.5e-4
    adam_eps: float = 1e-4
    batch_segments: int = 32
    n_step: int = 6
    queue_capacity: int = 512
    target_interval: int = 200
    eps_start: float = 1.0
    eps_final: float = 0.1
    eps_decay_updates: int = 10000
    lead_in: int = 5000
    growth: int = 10000
    total_updates: int = 30000
    eval_every: int = 10          # one greedy evaluation episode per this many
    workers: int = 1
    record_wallclock: bool = False

    def __post_init__(self):
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"unknown target mode {self.target_mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def micro_train_step(
    model: MultiAgentValueModel,
    target_model: MultiAgentValueModel,
    adam: AdamState,
    segments: list[NStepSegment],
    gamma: float,
    off_action_space: bool = True,
    target_mode: str = "standard",
) -> dict:
    """One optimiser step on a batch of n-step segments.

    Every state in a segment uses the discounted partial return to the
    segment end plus a bootstrap from the segment's final next-state at the
    trained level (no bootstrap past termination)."""
    if not segments:
        raise ConfigError("empty segment batch")
    n_levels = model.n_levels

    rows: list[Transition] = []
    seg_of_row: list[int] = []
    returns: list[float] = []
    horizons: list[int] = []
    for si, seg in enumerate(segments):
        k = len(seg.transitions)
        rs = [t.reward for t in seg.transitions]
        acc = 0.0
        partial = [0.0] * k
        for j in range(k - 1, -1, -1):
            acc = rs[j] + gamma * acc
            partial[j] = acc
        for j, t in enumerate(seg.transitions):
            rows.append(t)
            seg_of_row.append(si)
            returns.append(partial[j])
            horizons.append(k - j)
    r_count = len(rows)
    seg_of_row = np.array(seg_of_row)
    returns = np.array(returns)
    horizons = np.array(horizons, dtype=float)
    tags = np.array([t.level for t in rows])
    seg_done = np.array([seg.done for seg in segments])
    dones = seg_done[seg_of_row]

    feats = np.stack([t.state[0] for t in rows])
    alive = np.stack([t.state[1] for t in rows])
    gidx = np.stack([t.state[2] for t in rows])
    boot_feats = np.stack([seg.transitions[-1].next_state[0] for seg in segments])
    boot_alive = np.stack([seg.transitions[-1].next_state[1] for seg in segments])
    boot_gidx = np.stack([seg.transitions[-1].next_state[2] for seg in segments])

    boot_vals = level_bootstrap_values(
        target_model.forward(boot_feats, boot_alive, boot_gidx), target_mode
    )[seg_of_row]
    qset = model.forward(feats, alive, gidx, remember=True)
    lvl_idx = np.arange(n_levels)
    active = tags[:, None] <= lvl_idx[None, :] if off_action_space else tags[:, None] == lvl_idx[None, :]

    g_pad = max(len(np.atleast_1d(t.action)) for t in rows)
    orders = np.full((r_count, g_pad), -1, dtype=np.int64)
    for i, t in enumerate(rows):
        a = np.atleast_1d(t.action)
        orders[i, : len(a)] = a

    dq = [np.zeros_like(qset.q[l]) for l in range(n_levels)]
    td_sq = np.zeros((r_count, n_levels))
    for l in range(n_levels):
        idx = np.nonzero(active[:, l])[0]
        if len(idx) == 0:
            continue
        y = compute_target(
            returns[idx], dones[idx], boot_vals[idx], gamma, l, tags[idx], n_steps=horizons[idx]
        )
        g_l = qset.q[l].shape[1]
        chosen = np.zeros((len(idx), g_l), dtype=np.int64)
        for tag in np.unique(tags[idx]):
            sel = tags[idx] == tag
            shift = model.levels[l] - model.levels[int(tag)]
            anc = np.arange(g_l) >> shift
            chosen[sel] = orders[idx[sel]][:, anc]
        occ = qset.occupied[l][idx]
        safe_chosen = np.where(chosen < 0, 0, chosen)
        vals = np.take_along_axis(qset.q[l][idx], safe_chosen[:, :, None], axis=2)[:, :, 0]
        n_occ = occ.sum(axis=1)
        pred = (vals * occ).sum(axis=1) / n_occ
        err = pred - y
        td_sq[idx, l] = err**2
        w = (2.0 * err / r_count)[:, None] / n_occ[:, None] * occ
        sub = np.zeros_like(dq[l][idx])
        np.put_along_axis(sub, safe_chosen[:, :, None], w[:, :, None].astype(sub.dtype), axis=2)
        dq[l][idx] = sub
    loss = float(td_sq.sum(axis=1).mean())
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss {loss}")
    grads = model.backward(dq)
    adam_step(adam, model.parameters(), grads)
    return {"loss": loss, "active": active, "td_sq": td_sq}


class MicroTrainer:
    def __init__(self, config: MicroTrainConfig, seed: int):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.env = MicroBattle(config.scenario)
        exposed = [config.max_level] if config.scratch else None
        self.model = MultiAgentValueModel(
            tree_depth=config.max_level,
            feature_dim=feature_dim(config.max_level),
            exposed_levels=exposed,
            mode=config.mode,
            rng=self.rng,
        )
        self.target = self.model.clone()
        self.adam = adam_init(self.model.parameters(), lr=config.lr, eps=config.adam_eps)
        self.queue = SegmentQueue(config.queue_capacity)
        self.schedule = CurriculumSchedule(
            lead_in=config.lead_in,
            growth=config.growth,
            max_level=self.model.n_levels - 1,
            unit="updates",
        )
        self.updates = 0
        self.env_steps = 0
        self.episodes = 0

    def _nearest_level(self, alpha: float) -> int:
        return min(self.model.n_levels - 1, int(np.floor(alpha + 0.5)))

    def _rollout(
        self,
        env: MicroBattle,
        level: int,
        eps: float,
        rng: np.random.Generator,
        policy: MultiAgentValueModel | None = None,
    ) -> tuple[list[Transition], float, bool, int]:
        """One episode at a behaviour level; returns (transitions, return,
        won, decision steps)."""
        model = policy or self.model
        cfg = self.config
        state = env.reset(rng)
        ids = state.ally_ids
        tree = build_group_tree(ids, state.positions[ids], cfg.max_level)
        state.group_tree = tree
        obs = battle_features(state)
        transitions: list[Transition] = []
        ep_return = 0.0
        won = False
        steps = 0
        done = False
        while not done:
            qset = model.forward(obs[0][None], obs[1][None], obs[2][None])
            orders = epsilon_greedy_groups(qset, level, eps, rng)
            tree_level = model.levels[level]
            commands = [
                GroupCommand(tree_level, g, int(orders[g]))
                for g in range(len(orders))
                if orders[g] >= 0
            ]
            out = env.step(state, commands)
            done = out.done
            ep_return += out.reward
            won = won or out.won
            steps += 1
            ids = state.ally_ids
            if len(ids):
                tree = build_group_tree(ids, state.positions[ids], cfg.max_level, previous=tree)
                state.group_tree = tree
                next_obs = battle_features(state)
            else:
                next_obs = obs  # terminal placeholder; never bootstrapped
            transitions.append(
                Transition(
                    state=obs, action=orders, reward=out.reward,
                    next_state=next_obs, done=done, level=level,
                )
            )
            obs = next_obs
        return transitions, ep_return, won, steps

    def _drain(self, losses: list[float]) -> None:
        cfg = self.config
        while self.updates < cfg.total_updates and self.queue.ready(cfg.batch_segments):
            batch = self.queue.take(cfg.batch_segments)
            diag = micro_train_step(
                self.model,
                self.target,
                self.adam,
                batch,
                cfg.gamma,
                off_action_space=cfg.off_action_space,
                target_mode=cfg.target_mode,
            )
            losses.append(diag["loss"])
            self.updates += 1
            if self.updates % cfg.target_interval == 0:
                self.target = self.model.clone()

    def run(self) -> list[MetricsRow]:
        if self.config.workers > 1:
            return self._run_threaded()
        cfg = self.config
        rows: list[MetricsRow] = []
        t0 = time.perf_counter()
        while self.updates < cfg.total_updates:
            alpha = alpha_at(self.schedule, self.updates)
            is_eval = cfg.eval_every > 0 and (self.episodes + 1) % cfg.eval_every == 0
            if is_eval:
                level, eps = self._nearest_level(alpha), 0.0
            else:
                level = sample_level(alpha, self.rng)
                eps = linear_epsilon(
                    self.updates, cfg.eps_start, cfg.eps_final, cfg.eps_decay_updates
                )
            transitions, ep_return, won, steps = self._rollout(self.env, level, eps, self.rng)
            self.env_steps += steps
            self.episodes += 1
            losses: list[float] = []
            if not is_eval:
                for seg in segment_episode(transitions, cfg.n_step):
                    self.queue.put(seg)
                self._drain(losses)
            rows.append(
                MetricsRow(
                    episode=self.episodes,
                    env_steps=self.env_steps,
                    model_updates=self.updates,
                    alpha=alpha,
                    level=self.model.levels[level],
                    ep_return=ep_return,
                    success=won,
                    epsilon=eps,
                    mean_loss=float(np.mean(losses)) if losses else 0.0,
                    wall_clock_s=time.perf_counter() - t0 if cfg.record_wallclock else 0.0,
                )
            )
        return rows

    def _run_threaded(self) -> list[MetricsRow]:
        """Actor threads fill the queue; the calling thread learns. Actors act
        on periodic snapshots of the learner's model. Not deterministic."""
        cfg = self.config
        rows: list[MetricsRow] = []
        rows_lock = threading.Lock()
        stop = threading.Event()
        snapshot_box = {"model": self.model.clone()}
        t0 = time.perf_counter()

        def actor(worker_id: int) -> None:
            rng = np.random.default_rng(self.seed + 1000 + worker_id)
            env = MicroBattle(cfg.scenario)
            local_eps = 0
            while not stop.is_set():
                alpha = alpha_at(self.schedule, self.updates)
                is_eval = worker_id == 0 and cfg.eval_every > 0 and (local_eps + 1) % cfg.eval_every == 0
                if is_eval:
                    level, eps = self._nearest_level(alpha), 0.0
                else:
                    level = sample_level(alpha, rng)
                    eps = linear_epsilon(
                        self.updates, cfg.eps_start, cfg.eps_final, cfg.eps_decay_updates
                    )
                policy = snapshot_box["model"]
                transitions, ep_return, won, steps = self._rollout(env, level, eps, rng, policy)
                local_eps += 1
                if not is_eval:
                    for seg in segment_episode(transitions, cfg.n_step):
                        self.queue.put(seg)
                with rows_lock:
                    self.episodes += 1
                    self.env_steps += steps
                    rows.append(
                        MetricsRow(
                            episode=self.episodes,
                            env_steps=self.env_steps,
                            model_updates=self.updates,
                            alpha=alpha,
                            level=self.model.levels[level],
                            ep_return=ep_return,
                            success=won,
                            epsilon=eps,
                            mean_loss=0.0,
                            wall_clock_s=time.perf_counter() - t0 if cfg.record_wallclock else 0.0,
                        )
                    )

        threads = [
            threading.Thread(target=actor, args=(w,), daemon=True) for w in range(cfg.workers)
        ]
        for t in threads:
            t.start()
        try:
            while self.updates < cfg.total_updates:
                batch = self.queue.take(cfg.batch_segments, block=True)
                if batch is None:
                    break
                micro_train_step(
                    self.model,
                    self.target,
                    self.adam,
                    batch,
                    cfg.gamma,
                    off_action_space=cfg.off_action_space,
                    target_mode=cfg.target_mode,
                )
                self.updates += 1
                if self.updates % cfg.target_interval == 0:
                    self.target = self.model.clone()
                    snapshot_box["model"] = self.model.clone()
        finally:
            stop.set()
            self.queue.close()
            for t in threads:
                t.join(timeout=5.0)
        return rows


def run_microbattle_training(
    config: MicroTrainConfig, seed: int
) -> tuple[list[MetricsRow], MicroTrainer]:
    trainer = MicroTrainer(config, seed)
    rows = trainer.run()
    return rows, trainer
