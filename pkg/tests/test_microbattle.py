import io
import json

import numpy as np
import pytest

from gasrl.envs.microbattle import (
    DIRECTIONS,
    GroupCommand,
    MicroBattle,
    ORDER_STOP,
    ScenarioConfig,
    UnitStats,
    battle_features,
    feature_dim,
    scripted_opponent_orders,
)
from gasrl.errors import ConfigError, UsageError
from gasrl.grouping import build_group_tree


def attach_tree(state, depth=0):
    ids = state.ally_ids
    state.group_tree = build_group_tree(ids, state.positions[ids], depth)
    return state


def toward_enemy_order(state, attack=True) -> int:
    """Order index whose direction best matches ally centroid -> enemy centroid."""
    a = state.positions[state.ally_ids].mean(axis=0)
    e = state.positions[state.enemy_ids].mean(axis=0)
    v = e - a
    d = DIRECTIONS @ (v / (np.linalg.norm(v) + 1e-12))
    return int(np.argmax(d)) + (8 if attack else 0)


def drive_to_win(env, state, max_steps=400):
    """Scripted controller: attack-move toward the enemy centroid."""
    total, won, steps = 0.0, False, 0
    rewards = []
    while True:
        attach_tree(state)
        order = toward_enemy_order(state) if len(state.enemy_ids) else ORDER_STOP
        out = env.step(state, [GroupCommand(0, 0, order)])
        rewards.append(out.reward)
        total += out.reward
        won = won or out.won
        steps += 1
        if out.done or steps >= max_steps:
            return total, won, steps, rewards


def test_reset_counts_and_spawns(rng):
    env = MicroBattle(ScenarioConfig(n_ally=20, n_enemy=20))
    s = env.reset(rng)
    assert s.n_units == 40
    assert len(s.ally_ids) == 20 and len(s.enemy_ids) == 20
    assert np.all(s.hp == 32.0)
    assert s.starting_totals["ally"] == (20 * 32.0, 20)
    assert s.starting_totals["enemy"] == (20 * 32.0, 20)


def test_spawn_regions_disjoint_over_many_resets(rng):
    env = MicroBattle(ScenarioConfig(n_ally=5, n_enemy=5))
    for _ in range(1000):
        s = env.reset(rng)
        assert s.positions[s.ally_ids, 0].max() < s.positions[s.enemy_ids, 0].min()


def test_zero_team_size_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig(n_ally=0, n_enemy=5)


def test_no_contact_stop_zero_reward(rng):
    env = MicroBattle(ScenarioConfig(n_ally=4, n_enemy=4))
    s = attach_tree(env.reset(rng))
    out = env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    assert out.reward == 0.0
    assert not out.done


def test_enemies_hold_until_contact(rng):
    env = MicroBattle(ScenarioConfig(n_ally=4, n_enemy=4))
    s = attach_tree(env.reset(rng))
    before = s.positions[s.enemy_ids].copy()
    assert all(o == "hold" for o in scripted_opponent_orders(s))
    env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    assert np.array_equal(s.positions[s.enemy_ids], before)


def test_enemy_attacks_ally_in_range():
    env = MicroBattle(ScenarioConfig(n_ally=2, n_enemy=1))
    s = env.reset(np.random.default_rng(0))
    s.positions[:] = [[0.0, 0.0], [10.0, 10.0], [2.0, 0.0]]
    s.velocities[:] = 0.0
    attach_tree(s)
    orders = scripted_opponent_orders(s)
    assert orders == ["attack 0"]
    hp_before = s.hp[0]
    env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    assert s.hp[0] < hp_before


def test_enemy_tie_break_targets_lower_id():
    env = MicroBattle(ScenarioConfig(n_ally=2, n_enemy=1))
    s = env.reset(np.random.default_rng(0))
    # both allies exactly 3.0 from the enemy
    s.positions[:] = [[-3.0, 0.0], [3.0, 0.0], [0.0, 0.0]]
    s.velocities[:] = 0.0
    attach_tree(s)
    assert scripted_opponent_orders(s) == ["attack 0"]
    env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    assert s.hp[0] < 32.0 and s.hp[1] == 32.0


def test_damaged_enemy_engages_permanently():
    env = MicroBattle(ScenarioConfig(n_ally=1, n_enemy=1))
    s = env.reset(np.random.default_rng(0))
    s.positions[:] = [[0.0, 0.0], [3.5, 0.0]]
    attach_tree(s)
    env.step(s, [GroupCommand(0, 0, ORDER_STOP)])  # ally shoots, enemy now damaged
    assert s.hp[1] < 32.0
    # move the ally far away: the damaged enemy should chase, not hold
    s.positions[0] = [-15.0, 0.0]
    pos_before = s.positions[1].copy()
    attach_tree(s)
    env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    assert not np.array_equal(s.positions[1], pos_before)


def test_move_ignores_enemies_attack_move_engages():
    env = MicroBattle(ScenarioConfig(n_ally=1, n_enemy=1))
    s = env.reset(np.random.default_rng(0))
    s.positions[:] = [[0.0, 0.0], [3.0, 0.0]]
    attach_tree(s)
    out = env.step(s, [GroupCommand(0, 0, 0)])  # plain move east, through the enemy
    assert s.hp[1] == 32.0  # move never attacks
    s2 = env.reset(np.random.default_rng(0))
    s2.positions[:] = [[0.0, 0.0], [3.0, 0.0]]
    attach_tree(s2)
    env.step(s2, [GroupCommand(0, 0, 8)])  # attack-move east
    assert s2.hp[1] < 32.0


def test_reward_for_kills_and_damage():
    # 20 enemies at 32 hp: one step that removes 64 hp total and kills 2
    # (two at 32 overkill-free) pays 64/640 + 4 * 2/20 = 0.5
    stats = UnitStats(max_hp=32.0, damage=8.0, attack_range=4.0, speed=0.7, cooldown=3)
    env = MicroBattle(ScenarioConfig(n_ally=8, n_enemy=20, ally_stats=stats, enemy_stats=stats))
    s = env.reset(np.random.default_rng(1))
    # hand-placed: 8 allies in range of 2 enemies; give those enemies 32 hp
    # total combined damage applied in tick 1 = 8 attackers * 8 = 64
    s.positions[s.ally_ids] = [[0.0, float(k - 4)] for k in range(8)]
    s.positions[s.enemy_ids] = 99.0  # park the rest far away
    s.positions[8] = [2.0, -0.5]
    s.positions[9] = [2.0, 0.5]
    s.hp[8] = 32.0
    s.hp[9] = 32.0
    s.velocities[:] = 0.0
    attach_tree(s)
    out = env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    assert out.reward == pytest.approx(64.0 / 640.0 + 4.0 * 2.0 / 20.0)


def test_won_battle_reward_conservation_exact(rng):
    # dyadic scenario (16 enemies, 32 hp, damage 8) with a harmless opponent:
    # the undiscounted reward sum of a won episode is exactly 1 + 4 + 8 = 13
    harmless = UnitStats(max_hp=32.0, damage=0.0, attack_range=4.0, speed=0.7, cooldown=3)
    stats = UnitStats(max_hp=32.0, damage=8.0, attack_range=4.0, speed=0.7, cooldown=3)
    env = MicroBattle(
        ScenarioConfig(n_ally=16, n_enemy=16, ally_stats=stats, enemy_stats=harmless)
    )
    s = env.reset(rng)
    total, won, steps, rewards = drive_to_win(env, s)
    assert won
    assert total == 13.0


def test_hp_and_counts_never_increase(rng):
    env = MicroBattle(ScenarioConfig(n_ally=6, n_enemy=6))
    s = env.reset(rng)
    hp_prev = s.hp.sum()
    count_prev = s.alive.sum()
    for _ in range(60):
        if not len(s.ally_ids) or not len(s.enemy_ids):
            break
        attach_tree(s)
        env.step(s, [GroupCommand(0, 0, toward_enemy_order(s))])
        assert s.hp.sum() <= hp_prev + 1e-12
        assert s.alive.sum() <= count_prev
        hp_prev, count_prev = s.hp.sum(), s.alive.sum()


def test_timeout_is_a_loss(rng):
    env = MicroBattle(ScenarioConfig(n_ally=2, n_enemy=2, decision_limit=5))
    s = env.reset(rng)
    done = False
    while not done:
        attach_tree(s)
        out = env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
        done = out.done
    assert not out.won
    with pytest.raises(UsageError):
        env.step(s, [GroupCommand(0, 0, ORDER_STOP)])


def test_command_validation(rng):
    env = MicroBattle(ScenarioConfig(n_ally=4, n_enemy=4))
    s = attach_tree(env.reset(rng), depth=1)
    occ = s.group_tree.occupied(1)
    cmds = [GroupCommand(1, g, 0) for g in range(2) if occ[g]]
    with pytest.raises(UsageError):
        env.step(s, cmds[:-1] + [GroupCommand(1, 7, 0)])  # unknown group
    with pytest.raises(UsageError):
        env.step(s, cmds[:1] * 2 if len(cmds) > 1 else [])  # duplicate or empty
    with pytest.raises(UsageError):
        env.step(s, cmds[:-1] if len(cmds) > 1 else [])  # missing group
    with pytest.raises(ConfigError):
        GroupCommand(0, 0, 17)


def test_determinism_same_seed_same_trajectory():
    def run(seed):
        env = MicroBattle(ScenarioConfig(n_ally=5, n_enemy=5))
        s = env.reset(np.random.default_rng(seed))
        log = []
        for _ in range(40):
            if not len(s.ally_ids) or not len(s.enemy_ids):
                break
            attach_tree(s)
            env.step(s, [GroupCommand(0, 0, toward_enemy_order(s))])
            log.append((s.positions.copy(), s.hp.copy()))
        return log

    a, b = run(3), run(3)
    assert len(a) == len(b)
    for (pa, ha), (pb, hb) in zip(a, b):
        assert np.array_equal(pa, pb) and np.array_equal(ha, hb)


def test_mirror_symmetry_is_exact():
    def run(seed, mirror):
        env = MicroBattle(ScenarioConfig(n_ally=5, n_enemy=5))
        s = env.reset(np.random.default_rng(seed))
        if mirror:
            s.positions[:, 0] = -s.positions[:, 0]
        log = []
        for t in range(50):
            if not len(s.ally_ids) or not len(s.enemy_ids):
                break
            attach_tree(s)
            o = (t * 3) % 8
            if mirror:
                o = (4 - o) % 8
            env.step(s, [GroupCommand(0, 0, 8 + o)])
            log.append((s.positions.copy(), s.hp.copy()))
        return log

    plain, mirrored = run(5, False), run(5, True)
    assert len(plain) == len(mirrored)
    for (pa, ha), (pb, hb) in zip(plain, mirrored):
        flipped = pa.copy()
        flipped[:, 0] = -flipped[:, 0]
        assert np.array_equal(flipped, pb)
        assert np.array_equal(ha, hb)


def test_trace_lines(rng):
    env = MicroBattle(ScenarioConfig(n_ally=2, n_enemy=2))
    buf = io.StringIO()
    env.enable_trace(buf)
    s = attach_tree(env.reset(rng))
    env.step(s, [GroupCommand(0, 0, ORDER_STOP)])
    lines = [json.loads(l) for l in buf.getvalue().strip().split("\n")]
    assert len(lines) == 4
    assert set(lines[0]) == {"tick", "unit", "x", "y", "hp", "order"}


def test_battle_features_shapes_and_masks(rng):
    env = MicroBattle(ScenarioConfig(n_ally=4, n_enemy=3))
    s = attach_tree(env.reset(rng), depth=2)
    feats, alive, gidx = battle_features(s)
    assert feats.shape == (7, feature_dim(2))
    assert alive.all()
    assert np.all(gidx[:, s.enemy_ids] == -1)
    assert np.all(gidx[0, s.ally_ids] == 0)
    # ally flag and one-hot
    assert np.all(feats[s.ally_ids, 6] == 1.0)
    assert np.all(feats[s.enemy_ids, 6] == 0.0)
    onehots = feats[s.ally_ids, 7:]
    assert np.all(onehots.sum(axis=1) == 1.0)
    assert np.all(feats[s.enemy_ids, 7:] == 0.0)


def test_unit_view(rng):
    env = MicroBattle(ScenarioConfig(n_ally=2, n_enemy=2))
    s = env.reset(rng)
    u = s.unit(0)
    assert u.team == "ally" and u.hp == 32.0 and u.cooldown == 3
    v = s.unit(2)
    assert v.team == "enemy"
