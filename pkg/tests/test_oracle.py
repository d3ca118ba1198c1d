import numpy as np
import pytest

from gasrl.errors import ConfigError
from gasrl.hierarchy import build_force_ladder
from gasrl.oracle import (
    TabularMDP,
    check_fixed_point_equivalence,
    check_monotonicity,
    modified_value_iteration,
    random_mdp,
    value_iteration,
)


def single_state_mdp(gamma=0.9, reward=1.0):
    h = build_force_ladder(0)
    p = np.ones((1, 2, 1))
    r = np.full((1, 2), reward)
    return TabularMDP(hierarchy=h, transitions=p, rewards=r, gamma=gamma)


def two_state_chain():
    """Deterministic 2-state chain, gamma = 0.5, hand-solved:

    action 0 from s0 -> s1 (r 0), from s1 -> s1 (r 1)
    action 1 from s0 -> s0 (r -0.1), from s1 -> s0 (r 0)
    V(s1) = 1/(1-0.5) = 2;  V(s0) = max(0 + 0.5*2, -0.1 + 0.5*V(s0)) = 1
    Q = [[1.0, 0.4], [2.0, 0.5]]
    """
    h = build_force_ladder(0)
    p = np.zeros((2, 2, 2))
    p[0, 0, 1] = 1.0
    p[0, 1, 0] = 1.0
    p[1, 0, 1] = 1.0
    p[1, 1, 0] = 1.0
    r = np.array([[0.0, -0.1], [1.0, 0.0]])
    return TabularMDP(hierarchy=h, transitions=p, rewards=r, gamma=0.5)


def test_single_state_geometric_series():
    mdp = single_state_mdp()
    _, v = value_iteration(mdp, 0)
    assert abs(v[0] - 10.0) < 1e-8


def test_two_state_chain_matches_hand_dp():
    q, v = value_iteration(two_state_chain(), 0)
    assert np.allclose(q, [[1.0, 0.4], [2.0, 0.5]], atol=1e-9)
    assert np.allclose(v, [1.0, 2.0], atol=1e-9)


def test_restricting_actions_never_increases_value(rng):
    h = build_force_ladder(2)
    for _ in range(20):
        mdp = random_mdp(6, h, rng)
        _, v0 = value_iteration(mdp, 0)
        _, v1 = value_iteration(mdp, 1)
        _, v2 = value_iteration(mdp, 2)
        assert np.all(v0 <= v1 + 1e-9)
        assert np.all(v1 <= v2 + 1e-9)


def test_modified_fixed_point_matches_standard(rng):
    h = build_force_ladder(2)
    for _ in range(10):
        mdp = random_mdp(5, h, rng)
        joint = modified_value_iteration(mdp, 2)
        for l in range(3):
            q, _ = value_iteration(mdp, l)
            assert np.max(np.abs(joint[l] - q)) < 1e-6


def test_modified_level0_equals_standard(rng):
    h = build_force_ladder(2)
    mdp = random_mdp(4, h, rng)
    joint = modified_value_iteration(mdp, 0)
    q, _ = value_iteration(mdp, 0)
    assert np.max(np.abs(joint[0] - q)) < 1e-9


def test_modified_operator_differs_mid_iteration(rng):
    # initialise level 0 at its converged table and level 1 at zero: one
    # modified sweep bootstraps level 1 from the level-0 values, while the
    # standard level-1 operator sees only zeros
    h = build_force_ladder(1)
    mdp = random_mdp(4, h, rng)
    q0_star, v0_star = value_iteration(mdp, 0)
    top = h.n_levels - 1
    ids1 = h.lift_ids(1, top)
    r1, p1 = mdp.rewards[:, ids1], mdp.transitions[:, ids1, :]
    standard_sweep = r1 + mdp.gamma * (p1 @ np.zeros(mdp.n_states))
    init = [q0_star, np.zeros_like(r1)]
    joint = modified_value_iteration(mdp, 1, init=init, max_sweeps=1)
    modified_sweep_target = r1 + mdp.gamma * (p1 @ v0_star)
    assert np.allclose(joint[1], modified_sweep_target, atol=1e-12)
    assert np.max(np.abs(joint[1] - standard_sweep)) > 1e-3


def test_random_mdp_rows_sum_to_one(rng):
    h = build_force_ladder(2)
    mdp = random_mdp(7, h, rng)
    assert np.max(np.abs(mdp.transitions.sum(axis=2) - 1.0)) < 1e-12


def test_random_mdp_deterministic_by_seed():
    h = build_force_ladder(1)
    a = random_mdp(5, h, np.random.default_rng(9))
    b = random_mdp(5, h, np.random.default_rng(9))
    assert np.array_equal(a.transitions, b.transitions)
    assert np.array_equal(a.rewards, b.rewards)


def test_contraction_rate_bounded_by_gamma(rng):
    h = build_force_ladder(1)
    mdp = random_mdp(6, h, rng, gamma=0.8)
    ids = h.lift_ids(1, h.n_levels - 1)
    r, p = mdp.rewards[:, ids], mdp.transitions[:, ids, :]
    q = np.zeros_like(r)
    deltas = []
    for _ in range(30):
        q_next = r + mdp.gamma * (p @ q.max(axis=1))
        deltas.append(np.max(np.abs(q_next - q)))
        q = q_next
    for a, b in zip(deltas[1:], deltas[2:]):
        if a > 1e-13:
            assert b <= a * (mdp.gamma + 1e-9)


def test_check_helpers():
    ok, worst = check_monotonicity(10, seed=3)
    assert ok and worst <= 1e-9
    ok, worst = check_fixed_point_equivalence(5, seed=3)
    assert ok and worst <= 1e-6


def test_mdp_validation():
    h = build_force_ladder(0)
    bad_p = np.ones((1, 2, 1)) * 0.5
    with pytest.raises(ConfigError):
        TabularMDP(hierarchy=h, transitions=bad_p, rewards=np.zeros((1, 2)), gamma=0.9)
    with pytest.raises(ConfigError):
        TabularMDP(
            hierarchy=h, transitions=np.ones((1, 2, 1)), rewards=np.zeros((1, 2)), gamma=1.0
        )
