"""Experiment configuration: flat sectioned text (key = value), defaults per
task, environment-variable overrides, and round-trippable serialisation.

Algorithms: ``gas`` (the growing curriculum), ``scratch_fixed_level`` (train
the deepest action set only), and the ablations ``on_ac``, ``sep_q``,
``max_target`` and ``slow_epsilon`` (quarter-rate epsilon decay on the
deepest action set).
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, fields

from ..envs.microbattle import ScenarioConfig, UnitStats
from ..errors import ConfigError
from ..training.control_loop import ControlTrainConfig
from ..training.micro_loop import MicroTrainConfig

TASKS = ("mountain_car", "acrobot", "microbattle")
ALGORITHMS = ("gas", "scratch_fixed_level", "on_ac", "sep_q", "max_target", "slow_epsilon")

ENV_PREFIX = "GASRL_"

# task-dependent defaults; everything else defaults in the dataclass
_TASK_DEFAULTS = {
    "mountain_car": dict(gamma=0.99, lead_in=25000, growth=25000, eps_decay=25000,
                         total=100000, lr=5e-4, batch_size=128, window=20),
    "acrobot": dict(gamma=0.998, lead_in=25000, growth=25000, eps_decay=25000,
                    total=100000, lr=5e-4, batch_size=128, window=20),
    "microbattle": dict(gamma=0.99, lead_in=5000, growth=10000, eps_decay=10000,
                        total=30000, lr=2.5e-4, batch_size=32, window=500),
}


@dataclass
class ExperimentConfig:
    # [experiment]
    task: str = "mountain_car"
    algorithm: str = "gas"
    depth: int = 2
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    run_name: str = ""
    workers: int = 1
    record_wallclock: bool = False
    # [curriculum]
    lead_in: int = -1             # -1: task default
    growth: int = -1
    # [training]
    gamma: float = -1.0
    lr: float = -1.0
    adam_eps: float = 1e-4
    batch_size: int = -1
    buffer_size: int = 10000
    target_interval: int = 200
    eps_start: float = 1.0
    eps_final: float = 0.1
    eps_decay: int = -1
    env_steps_per_update: int = 4
    n_step: int = 6
    queue_capacity: int = 512
    total: int = -1               # env steps (control) or model updates (microbattle)
    eval_every: int = 10
    window: int = -1              # moving-average window for curves
    # [scenario] (microbattle only)
    n_ally: int = 20
    n_enemy: int = 20
    unit_hp: float = 32.0
    unit_damage: float = 8.0
    unit_range: float = 4.0
    unit_speed: float = 0.7
    unit_cooldown: int = 3
    arena_size: float = 40.0
    decision_limit: int = 400
    frame_skip: int = 4

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        if not (0 <= self.depth <= 8):
            raise ConfigError("depth must be in [0, 8]")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        d = _TASK_DEFAULTS[self.task]
        if self.lead_in < 0:
            self.lead_in = d["lead_in"]
        if self.growth < 0:
            self.growth = d["growth"]
        if self.gamma < 0:
            self.gamma = d["gamma"]
        if self.lr < 0:
            self.lr = d["lr"]
        if self.batch_size < 0:
            self.batch_size = d["batch_size"]
        if self.eps_decay < 0:
            self.eps_decay = d["eps_decay"]
        if self.total < 0:
            self.total = d["total"]
        if self.window < 0:
            self.window = d["window"]
        if not self.run_name:
            self.run_name = f"{self.task}_{self.algorithm}_d{self.depth}"

    # --- derived views -----------------------------------------------------

    @property
    def is_control(self) -> bool:
        return self.task in ("mountain_car", "acrobot")

    @property
    def scratch(self) -> bool:
        return self.algorithm in ("scratch_fixed_level", "slow_epsilon")

    @property
    def mode(self) -> str:
        return "sep_q" if self.algorithm == "sep_q" else "composed"

    @property
    def off_action_space(self) -> bool:
        return self.algorithm != "on_ac"

    @property
    def target_mode(self) -> str:
        return "max_levels" if self.algorithm == "max_target" else "standard"

    @property
    def effective_eps_decay(self) -> int:
        # slow_epsilon: quarter-rate decay on the deepest action set
        return self.eps_decay * 4 if self.algorithm == "slow_epsilon" else self.eps_decay

    def control_config(self) -> ControlTrainConfig:
        if not self.is_control:
            raise ConfigError("not a control task")
        return ControlTrainConfig(
            task=self.task,
            max_level=self.depth,
            scratch=self.scratch,
            mode=self.mode,
            off_action_space=self.off_action_space,
            target_mode=self.target_mode,
            gamma=self.gamma,
            lr=self.lr,
            adam_eps=self.adam_eps,
            batch_size=self.batch_size,
            buffer_size=self.buffer_size,
            target_interval=self.target_interval,
            eps_start=self.eps_start,
            eps_final=self.eps_final,
            eps_decay_steps=self.effective_eps_decay,
            env_steps_per_update=self.env_steps_per_update,
            lead_in=self.lead_in,
            growth=self.growth,
            total_env_steps=self.total,
            record_wallclock=self.record_wallclock,
        )

    def scenario_config(self) -> ScenarioConfig:
        stats = UnitStats(
            max_hp=self.unit_hp,
            damage=self.unit_damage,
            attack_range=self.unit_range,
            speed=self.unit_speed,
            cooldown=self.unit_cooldown,
        )
        return ScenarioConfig(
            n_ally=self.n_ally,
            n_enemy=self.n_enemy,
            ally_stats=stats,
            enemy_stats=stats,
            arena_width=self.arena_size,
            arena_height=self.arena_size,
            decision_limit=self.decision_limit,
            frame_skip=self.frame_skip,
        )

    def micro_config(self) -> MicroTrainConfig:
        if self.is_control:
            raise ConfigError("not a microbattle task")
        return MicroTrainConfig(
            scenario=self.scenario_config(),
            max_level=self.depth,
            scratch=self.scratch,
            mode=self.mode,
            off_action_space=self.off_action_space,
            target_mode=self.target_mode,
            gamma=self.gamma,
            lr=self.lr,
            adam_eps=self.adam_eps,
            batch_segments=self.batch_size,
            n_step=self.n_step,
            queue_capacity=self.queue_capacity,
            target_interval=self.target_interval,
            eps_start=self.eps_start,
            eps_final=self.eps_final,
            eps_decay_updates=self.effective_eps_decay,
            lead_in=self.lead_in,
            growth=self.growth,
            total_updates=self.total,
            eval_every=self.eval_every,
            workers=self.workers,
            record_wallclock=self.record_wallclock,
        )


_SECTIONS = {
    "experiment": (
        "task", "algorithm", "depth", "seeds", "out_dir", "run_name",
        "workers", "record_wallclock",
    ),
    "curriculum": ("lead_in", "growth"),
    "training": (
        "gamma", "lr", "adam_eps", "batch_size", "buffer_size", "target_interval",
        "eps_start", "eps_final", "eps_decay", "env_steps_per_update", "n_step",
        "queue_capacity", "total", "eval_every", "window",
    ),
    "scenario": (
        "n_ally", "n_enemy", "unit_hp", "unit_damage", "unit_range", "unit_speed",
        "unit_cooldown", "arena_size", "decision_limit", "frame_skip",
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    t = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if key == "seeds":
            return [int(x) for x in raw.split(",") if x.strip() != ""]
        if t == "bool":
            if raw.lower() in ("true", "false"):
                return raw.lower() == "true"
            raise ValueError("expected true/false")
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for key {key!r}: {raw!r} ({e})") from e


def parse_config(text: str, apply_env: bool = True) -> ExperimentConfig:
    """Parse sectioned key = value text into a config; unknown sections or
    keys raise with the offending name. GASRL_<KEY> environment variables
    override any key."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax error: {e}") from e
    values: dict = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[key] = _parse_value(key, raw)
    if apply_env:
        for key in _FIELD_TYPES:
            env_key = ENV_PREFIX + key.upper()
            if env_key in os.environ:
                values[key] = _parse_value(key, os.environ[env_key])
    return ExperimentConfig(**values)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    for section, keys in _SECTIONS.items():
        if section == "scenario" and cfg.is_control:
            continue
        out.write(f"[{section}]\n")
        for key in keys:
            val = getattr(cfg, key)
            if key == "seeds":
                val = ",".join(str(s) for s in val)
            elif isinstance(val, bool):
                val = "true" if val else "false"
            out.write(f"{key} = {val}\n")
        out.write("\n")
    return out.getvalue()


def load_config(path: str, apply_env: bool = True) -> ExperimentConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, apply_env=apply_env)
