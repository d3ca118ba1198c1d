"""Replay-buffer DQN for the discretised control tasks.

One behaviour level is drawn per episode from the curriculum; each stored
transition carries that tag and trains every level at or above it (the
off-action-space update), or exactly its own level in the ON-AC ablation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..curriculum import CurriculumSchedule, alpha_at, sample_level
from ..envs.control import make_control_env
from ..errors import ConfigError
from ..harness.metrics import MetricsRow
from ..hierarchy import ActionHierarchy, build_force_ladder, restrict_to_top
from ..models.control import ControlValueModel
from ..nets import AdamState, adam_init, adam_step
from .replay import ReplayBuffer, Transition
from .targets import (
    TARGET_MODES,
    compute_target,
    epsilon_greedy_control,
    level_bootstrap_values,
)


@dataclass
class ControlTrainConfig:
    task: str = "mountain_car"
    max_level: int = 2
    scratch: bool = False          # train only the deepest action set, no curriculum
    mode: str = "composed"         # value composition; "sep_q" for the ablation
    off_action_space: bool = True  # False = ON-AC ablation
    target_mode: str = "standard"  # "max_levels" for the multi-level target
    gamma: float = 0.99
    lr: float = 5e-4
    adam_eps: float = 1e-4
    batch_size: int = 128
    buffer_size: int = 10000
    target_interval: int = 200     # model updates between target refreshes
    eps_start: float = 1.0
    eps_final: float = 0.1
    eps_decay_steps: int = 25000
    env_steps_per_update: int = 4
    lead_in: int = 25000
    growth: int = 25000
    total_env_steps: int = 100000
    record_wallclock: bool = False

    def __post_init__(self):
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"unknown target mode {self.target_mode!r}")


def linear_epsilon(step: int, start: float, final: float, decay_steps: int) -> float:
    if decay_steps <= 0:
        return final
    return start + (final - start) * min(1.0, step / decay_steps)


def control_train_step(
    model: ControlValueModel,
    target_model: ControlValueModel,
    hierarchy: ActionHierarchy,
    adam: AdamState,
    batch: list[Transition],
    gamma: float,
    off_action_space: bool = True,
    target_mode: str = "standard",
) -> dict:
    """One optimiser step on the summed multi-level TD loss.

    Returns diagnostics: total loss, the [B, L] active-level mask, and the
    per-sample per-level squared TD terms (zero where inactive)."""
    b = len(batch)
    if b == 0:
        raise ConfigError("empty batch")
    n_levels = model.n_levels
    s = np.stack([t.state for t in batch])
    s2 = np.stack([t.next_state for t in batch])
    r = np.array([t.reward for t in batch])
    done = np.array([t.done for t in batch])
    tags = np.array([t.level for t in batch])
    a_tag = np.array([t.action for t in batch])

    boot = level_bootstrap_values(target_model.forward(s2), target_mode)
    qset = model.forward(s, remember=True)
    lvl_idx = np.arange(n_levels)
    active = tags[:, None] <= lvl_idx[None, :] if off_action_space else tags[:, None] == lvl_idx[None, :]

    dq = [np.zeros_like(qset.q[l]) for l in range(n_levels)]
    td_sq = np.zeros((b, n_levels))
    for l in range(n_levels):
        idx = np.nonzero(active[:, l])[0]
        if len(idx) == 0:
            continue
        y = compute_target(r[idx], done[idx], boot[idx], gamma, l, tags[idx])
        a_l = np.empty(len(idx), dtype=np.int64)
        for tag in np.unique(tags[idx]):
            sel = tags[idx] == tag
            a_l[sel] = hierarchy.lift_ids(int(tag), l)[a_tag[idx][sel]]
        pred = qset.q[l][idx, a_l]
        err = pred - y
        td_sq[idx, l] = err**2
        dq[l][idx, a_l] = 2.0 * err / b
    loss = float(td_sq.sum(axis=1).mean())
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss {loss}")
    grads = model.backward(dq)
    adam_step(adam, model.parameters(), grads)
    return {"loss": loss, "active": active, "td_sq": td_sq}


class ControlTrainer:
    def __init__(self, config: ControlTrainConfig, seed: int):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.env = make_control_env(config.task)
        full = build_force_ladder(config.max_level)
        self.hierarchy = restrict_to_top(full) if config.scratch else full
        self.model = ControlValueModel(
            self.hierarchy, self.env.feature_dim, mode=config.mode, rng=self.rng
        )
        self.target = self.model.clone()
        self.adam = adam_init(
            self.model.parameters(), lr=config.lr, eps=config.adam_eps
        )
        self.buffer = ReplayBuffer(config.buffer_size)
        self.schedule = CurriculumSchedule(
            lead_in=config.lead_in,
            growth=config.growth,
            max_level=self.model.n_levels - 1,
            unit="env_steps",
        )
        self.env_steps = 0
        self.updates = 0

    def run(self) -> list[MetricsRow]:
        cfg = self.config
        rows: list[MetricsRow] = []
        episode = 0
        t0 = time.perf_counter()
        while self.env_steps < cfg.total_env_steps:
            alpha = alpha_at(self.schedule, self.env_steps)
            level = sample_level(alpha, self.rng)
            state = self.env.reset(self.rng)
            ep_return = 0.0
            reached = False
            losses: list[float] = []
            eps = cfg.eps_start
            done = False
            while not done:
                eps = linear_epsilon(
                    self.env_steps, cfg.eps_start, cfg.eps_final, cfg.eps_decay_steps
                )
                feats = self.env.features(state)
                qset = self.model.forward(feats[None, :].astype(np.float32))
                action = epsilon_greedy_control(qset, level, eps, self.rng)
                force = float(self.hierarchy.payloads[level][action])
                out = self.env.step(state, force)
                self.buffer.add(
                    Transition(
                        state=feats.astype(np.float32),
                        action=action,
                        reward=out.reward,
                        next_state=self.env.features(out.state).astype(np.float32),
                        done=out.done,
                        level=level,
                    )
                )
                ep_return += out.reward
                reached = reached or out.reached_goal
                state = out.state
                done = out.done
                self.env_steps += 1
                if (
                    self.env_steps % cfg.env_steps_per_update == 0
                    and len(self.buffer) >= cfg.batch_size
                ):
                    batch = self.buffer.sample(cfg.batch_size, self.rng)
                    diag = control_train_step(
                        self.model,
                        self.target,
                        self.hierarchy,
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
            episode += 1
            rows.append(
                MetricsRow(
                    episode=episode,
                    env_steps=self.env_steps,
                    model_updates=self.updates,
                    alpha=alpha,
                    level=level,
                    ep_return=ep_return,
                    success=reached,
                    epsilon=eps,
                    mean_loss=float(np.mean(losses)) if losses else 0.0,
                    wall_clock_s=time.perf_counter() - t0 if cfg.record_wallclock else 0.0,
                )
            )
        return rows


def run_control_training(
    config: ControlTrainConfig, seed: int
) -> tuple[list[MetricsRow], ControlTrainer]:
    trainer = ControlTrainer(config, seed)
    rows = trainer.run()
    return rows, trainer
