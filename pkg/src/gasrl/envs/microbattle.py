"""Two-army battle simulator with per-group orders and a scripted defender.

One decision step advances the simulation by a fixed number of ticks. Ally
units obey their group's order (move / attack-move in eight directions, or
stop); enemy units hold position until an ally enters their attack range or
they take damage, then permanently engage by chasing and attacking the
closest ally. The step reward is the normalised enemy hit points removed,
plus 4 times the normalised enemy units killed, plus 8 for eliminating the
whole enemy army. Ties and timeouts count as losses.

The arena is centred on the origin so that mirroring a battle across the
y-axis is an exact floating-point negation: mirrored setups produce exactly
mirrored trajectories.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from ..errors import ConfigError, UsageError
from ..grouping import GroupTree

N_ORDERS = 17
ORDER_STOP = 16

# eight cardinal/diagonal unit vectors, order id 0..7 = move, 8..15 = attack-move
_SQ = math.sqrt(0.5)
DIRECTIONS = np.array(
    [
        (1.0, 0.0),
        (_SQ, _SQ),
        (0.0, 1.0),
        (-_SQ, _SQ),
        (-1.0, 0.0),
        (-_SQ, -_SQ),
        (0.0, -1.0),
        (_SQ, -_SQ),
    ]
)

ORDER_NAMES = (
    [f"move_{d}" for d in ("e", "ne", "n", "nw", "w", "sw", "s", "se")]
    + [f"attack_{d}" for d in ("e", "ne", "n", "nw", "w", "sw", "s", "se")]
    + ["stop"]
)


@dataclass(frozen=True)
class UnitStats:
    max_hp: float = 32.0
    damage: float = 8.0
    attack_range: float = 4.0
    speed: float = 0.7          # distance per simulation tick
    cooldown: int = 3           # ticks between attacks


@dataclass(frozen=True)
class ScenarioConfig:
    n_ally: int = 20
    n_enemy: int = 20
    ally_stats: UnitStats = field(default_factory=UnitStats)
    enemy_stats: UnitStats = field(default_factory=UnitStats)
    arena_width: float = 40.0
    arena_height: float = 40.0
    decision_limit: int = 400
    frame_skip: int = 4
    spawn_margin: float = 2.0

    def __post_init__(self):
        if self.n_ally < 1 or self.n_enemy < 1:
            raise ConfigError("team sizes must be >= 1")
        if self.frame_skip < 1 or self.decision_limit < 1:
            raise ConfigError("frame_skip and decision_limit must be >= 1")


@dataclass(frozen=True)
class Unit:
    id: int
    team: str                  # "ally" | "enemy"
    position: tuple[float, float]
    hp: float
    max_hp: float
    damage: float
    attack_range: float
    speed: float
    cooldown_remaining: int
    cooldown: int


@dataclass
class BattleState:
    """Struct-of-arrays over all units ever spawned; ``alive`` masks the
    active set. Ally units take ids 0..n_ally-1, enemies follow."""

    config: ScenarioConfig
    positions: np.ndarray      # [N, 2]
    velocities: np.ndarray     # [N, 2] displacement of the last tick
    hp: np.ndarray             # [N]
    cooldowns: np.ndarray      # [N] int, ticks until the next attack
    alive: np.ndarray          # [N] bool
    engaged: np.ndarray        # [N] bool (meaningful for enemies)
    is_ally: np.ndarray        # [N] bool
    tick: int = 0
    decisions: int = 0
    group_tree: GroupTree | None = None

    @property
    def n_units(self) -> int:
        return len(self.hp)

    @property
    def ally_ids(self) -> np.ndarray:
        return np.nonzero(self.is_ally & self.alive)[0]

    @property
    def enemy_ids(self) -> np.ndarray:
        return np.nonzero(~self.is_ally & self.alive)[0]

    def unit(self, unit_id: int) -> Unit:
        ally = bool(self.is_ally[unit_id])
        stats = self.config.ally_stats if ally else self.config.enemy_stats
        return Unit(
            id=unit_id,
            team="ally" if ally else "enemy",
            position=tuple(self.positions[unit_id]),
            hp=float(self.hp[unit_id]),
            max_hp=stats.max_hp,
            damage=stats.damage,
            attack_range=stats.attack_range,
            speed=stats.speed,
            cooldown_remaining=int(self.cooldowns[unit_id]),
            cooldown=stats.cooldown,
        )

    def team_totals(self, ally: bool) -> tuple[float, int]:
        mask = self.is_ally == ally
        sel = mask & self.alive
        return float(self.hp[sel].sum()), int(sel.sum())

    @property
    def starting_totals(self) -> dict[str, tuple[float, int]]:
        c = self.config
        return {
            "ally": (c.ally_stats.max_hp * c.n_ally, c.n_ally),
            "enemy": (c.enemy_stats.max_hp * c.n_enemy, c.n_enemy),
        }


@dataclass(frozen=True)
class GroupCommand:
    level: int
    group: int
    order: int

    def __post_init__(self):
        if not (0 <= self.order < N_ORDERS):
            raise ConfigError(f"order {self.order} outside [0, {N_ORDERS})")


@dataclass(frozen=True)
class BattleStepOutcome:
    state: BattleState
    reward: float
    done: bool
    won: bool


class MicroBattle:
    def __init__(self, config: ScenarioConfig | None = None):
        self.config = config or ScenarioConfig()
        self._trace: IO[str] | None = None

    def enable_trace(self, stream: IO[str]) -> None:
        """Write one JSON line per unit per decision step (tick, id, position,
        hp, order) for debugging and visual post-processing."""
        self._trace = stream

    def reset(self, rng: np.random.Generator) -> BattleState:
        c = self.config
        half_w, half_h = c.arena_width / 2, c.arena_height / 2
        m = c.spawn_margin
        # disjoint spawn rectangles: allies in the west band, enemies east
        ally_x = rng.uniform(-half_w + m, -half_w / 4, size=c.n_ally)
        enemy_x = rng.uniform(half_w / 4, half_w - m, size=c.n_enemy)
        ys = rng.uniform(-half_h + m, half_h - m, size=c.n_ally + c.n_enemy)
        n = c.n_ally + c.n_enemy
        positions = np.empty((n, 2))
        positions[: c.n_ally, 0] = ally_x
        positions[c.n_ally :, 0] = enemy_x
        positions[:, 1] = ys
        is_ally = np.zeros(n, dtype=bool)
        is_ally[: c.n_ally] = True
        hp = np.where(is_ally, c.ally_stats.max_hp, c.enemy_stats.max_hp).astype(float)
        return BattleState(
            config=c,
            positions=positions,
            velocities=np.zeros((n, 2)),
            hp=hp,
            cooldowns=np.zeros(n, dtype=np.int64),
            alive=np.ones(n, dtype=bool),
            engaged=np.zeros(n, dtype=bool),
            is_ally=is_ally,
        )

    def _unit_orders(self, state: BattleState, commands: list[GroupCommand]) -> np.ndarray:
        """Resolve group commands to one order id per ally unit."""
        tree = state.group_tree
        if tree is None:
            raise UsageError("state has no group tree attached")
        if not commands:
            raise UsageError("no commands given")
        level = commands[0].level
        if any(cmd.level != level for cmd in commands):
            raise UsageError("commands must all target one level")
        occ = tree.occupied(level)
        seen = {}
        for cmd in commands:
            if not (0 <= cmd.group < len(occ)) or not occ[cmd.group]:
                raise UsageError(f"command for unknown or empty group {cmd.group}")
            if cmd.group in seen:
                raise UsageError(f"duplicate command for group {cmd.group}")
            seen[cmd.group] = cmd.order
        missing = [g for g in np.nonzero(occ)[0] if int(g) not in seen]
        if missing:
            raise UsageError(f"missing command for non-empty groups {missing}")
        orders = np.full(state.n_units, -1, dtype=np.int64)
        for i, uid in enumerate(tree.unit_ids):
            orders[uid] = seen[int(tree.assignment[level, i])]
        return orders

    def step(
        self, state: BattleState, commands: list[GroupCommand]
    ) -> BattleStepOutcome:
        if state.decisions >= state.config.decision_limit:
            raise UsageError("step called after the decision limit")
        if not state.alive.any():
            raise UsageError("step called on a finished battle")
        orders = self._unit_orders(state, commands)
        prev_hp, _ = state.team_totals(ally=False)
        prev_count = int((~state.is_ally & state.alive).sum())
        for _ in range(state.config.frame_skip):
            self._tick(state, orders)
            if not (state.is_ally & state.alive).any() or not (
                ~state.is_ally & state.alive
            ).any():
                break
        state.decisions += 1
        new_hp, _ = state.team_totals(ally=False)
        new_count = int((~state.is_ally & state.alive).sum())
        start_hp, start_count = state.starting_totals["enemy"]
        reward = (prev_hp - new_hp) / start_hp + 4.0 * (prev_count - new_count) / start_count
        allies_alive = bool((state.is_ally & state.alive).any())
        enemies_alive = bool((~state.is_ally & state.alive).any())
        won = not enemies_alive and allies_alive
        if won:
            reward += 8.0
        done = not allies_alive or not enemies_alive or state.decisions >= state.config.decision_limit
        if self._trace is not None:
            self._write_trace(state, orders)
        return BattleStepOutcome(state=state, reward=reward, done=done, won=won)

    def _tick(self, state: BattleState, ally_orders: np.ndarray) -> None:
        c = state.config
        alive = state.alive
        pos = state.positions
        np.maximum(state.cooldowns - 1, 0, out=state.cooldowns)

        ally_idx = np.nonzero(state.is_ally & alive)[0]
        enemy_idx = np.nonzero(~state.is_ally & alive)[0]
        velocity = np.zeros_like(state.velocities)
        attacks: list[tuple[int, int]] = []  # (attacker, target)

        if len(ally_idx) and len(enemy_idx):
            diff = pos[ally_idx][:, None, :] - pos[enemy_idx][None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        else:
            dist = np.zeros((len(ally_idx), len(enemy_idx)))

        # enemy engagement: an ally within the enemy's own attack range, or
        # damage already taken, permanently flips the unit to engaged
        if len(enemy_idx):
            in_range_of = (
                dist <= c.enemy_stats.attack_range
            ).any(axis=0) if len(ally_idx) else np.zeros(len(enemy_idx), dtype=bool)
            state.engaged[enemy_idx] |= in_range_of
            state.engaged[enemy_idx] |= state.hp[enemy_idx] < c.enemy_stats.max_hp

        # ally intents: stop and attack-move both engage the closest in-range
        # enemy, holding position while any enemy is in range; plain move
        # ignores enemies entirely
        for row, uid in enumerate(ally_idx):
            order = int(ally_orders[uid])
            if order < 0:
                continue
            stats = c.ally_stats
            if order == ORDER_STOP or order >= 8:
                if len(enemy_idx):
                    d = dist[row]
                    in_range = d <= stats.attack_range
                    if in_range.any():
                        if state.cooldowns[uid] == 0:
                            pick = int(np.argmin(np.where(in_range, d, np.inf)))
                            attacks.append((uid, int(enemy_idx[pick])))
                        continue
            if order != ORDER_STOP:
                velocity[uid] = DIRECTIONS[order % 8] * stats.speed

        # scripted defenders: hold until engaged, then chase/attack closest ally
        for col, uid in enumerate(enemy_idx):
            if not state.engaged[uid] or not len(ally_idx):
                continue
            stats = c.enemy_stats
            d = dist[:, col]
            pick = int(np.argmin(d))  # argmin takes the lowest ally id on ties
            target = int(ally_idx[pick])
            if d[pick] <= stats.attack_range:
                if state.cooldowns[uid] == 0:
                    attacks.append((uid, target))
            else:
                to = pos[target] - pos[uid]
                norm = math.sqrt(to[0] ** 2 + to[1] ** 2)
                if norm > 0:
                    velocity[uid] = to / norm * stats.speed

        # movement with boundary clamping; velocities store the realised move
        half_w, half_h = c.arena_width / 2, c.arena_height / 2
        moved = pos + velocity
        np.clip(moved[:, 0], -half_w, half_w, out=moved[:, 0])
        np.clip(moved[:, 1], -half_h, half_h, out=moved[:, 1])
        state.velocities = np.where(alive[:, None], moved - pos, 0.0)
        state.positions = np.where(alive[:, None], moved, pos)

        # simultaneous attacks against tick-start targets
        for attacker, target in attacks:
            dmg = c.ally_stats.damage if state.is_ally[attacker] else c.enemy_stats.damage
            state.hp[target] = max(0.0, state.hp[target] - dmg)
            stats = c.ally_stats if state.is_ally[attacker] else c.enemy_stats
            state.cooldowns[attacker] = stats.cooldown
        state.alive &= state.hp > 0
        state.tick += 1

    def _write_trace(self, state: BattleState, orders: np.ndarray) -> None:
        for uid in np.nonzero(state.alive)[0]:
            rec = {
                "tick": state.tick,
                "unit": int(uid),
                "x": round(float(state.positions[uid, 0]), 4),
                "y": round(float(state.positions[uid, 1]), 4),
                "hp": float(state.hp[uid]),
                "order": ORDER_NAMES[int(orders[uid])] if orders[uid] >= 0 else "-",
            }
            self._trace.write(json.dumps(rec) + "\n")


def scripted_opponent_orders(state: BattleState) -> list[str]:
    """Readable view of what each enemy unit will do next tick: 'hold',
    'attack <id>' or 'chase <id>'. Mirrors the logic inside the tick."""
    out = []
    c = state.config
    ally_idx = state.ally_ids
    for uid in state.enemy_ids:
        engaged = state.engaged[uid] or state.hp[uid] < c.enemy_stats.max_hp
        if len(ally_idx):
            d = np.linalg.norm(state.positions[ally_idx] - state.positions[uid], axis=1)
            engaged = engaged or bool((d <= c.enemy_stats.attack_range).any())
        if not engaged or not len(ally_idx):
            out.append("hold")
            continue
        pick = int(np.argmin(d))
        target = int(ally_idx[pick])
        verb = "attack" if d[pick] <= c.enemy_stats.attack_range else "chase"
        out.append(f"{verb} {target}")
    return out


def battle_features(state: BattleState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Learning view of a battle state.

    Returns (features [N, F], alive [N], group_index [depth+1, N]). Per unit:
    normalised position, last-tick velocity over speed, hp fraction, cooldown
    fraction, ally flag, and a one-hot of the unit's group at the deepest tree
    level (zeros for enemies). group_index is -1 for enemies and dead units.
    Requires a group tree attached to the state.
    """
    tree = state.group_tree
    if tree is None:
        raise UsageError("state has no group tree attached")
    c = state.config
    n = state.n_units
    depth = tree.depth
    g_max = 2**depth
    feats = np.zeros((n, 7 + g_max), dtype=np.float32)
    half_w, half_h = c.arena_width / 2, c.arena_height / 2
    feats[:, 0] = state.positions[:, 0] / half_w
    feats[:, 1] = state.positions[:, 1] / half_h
    speed = np.where(state.is_ally, c.ally_stats.speed, c.enemy_stats.speed)
    feats[:, 2] = state.velocities[:, 0] / np.maximum(speed, 1e-9)
    feats[:, 3] = state.velocities[:, 1] / np.maximum(speed, 1e-9)
    max_hp = np.where(state.is_ally, c.ally_stats.max_hp, c.enemy_stats.max_hp)
    feats[:, 4] = state.hp / max_hp
    cd = np.where(state.is_ally, c.ally_stats.cooldown, c.enemy_stats.cooldown)
    feats[:, 5] = state.cooldowns / np.maximum(cd, 1)
    feats[:, 6] = state.is_ally.astype(np.float32)
    group_index = np.full((depth + 1, n), -1, dtype=np.int64)
    for i, uid in enumerate(tree.unit_ids):
        if state.alive[uid]:
            group_index[:, uid] = tree.assignment[:, i]
            feats[uid, 7 + tree.assignment[depth, i]] = 1.0
    feats[~state.alive] = 0.0
    return feats, state.alive.copy(), group_index


def feature_dim(tree_depth: int) -> int:
    return 7 + 2**tree_depth
