import numpy as np
import pytest

from gasrl.errors import ConfigError, UsageError
from gasrl.hierarchy import build_force_ladder, force_id, restrict_to_top
from gasrl.models.control import ControlValueModel
from gasrl.models.multiagent import MultiAgentValueModel
from gasrl.models.qset import QValueSet, compose_control_q, greedy_actions, joint_value

from conftest import finite_diff_check, randomize_biases


# ---------------------------------------------------------------- composition

def test_compose_hand_example():
    # residuals d0(+1) = 0.2, d1(+0.5) = -0.1 -> Q1(+0.5) = 0.1
    h = build_force_ladder(1)
    id_plus1 = force_id(h, 0, 1.0)
    id_half = force_id(h, 1, 0.5)
    d0 = np.zeros((1, 2))
    d0[0, id_plus1] = 0.2
    d1 = np.zeros((1, 4))
    d1[0, id_half] = -0.1
    qs = compose_control_q([d0, d1], [None, h.parents[1]])
    assert qs[1][0, id_half] == pytest.approx(0.1)


def test_compose_sep_q_ignores_parents():
    h = build_force_ladder(1)
    d0 = np.array([[0.2, 0.0]])
    d1 = np.array([[5.0, 5.0, 5.0, 5.0]])
    qs = compose_control_q([d0, d1], [None, h.parents[1]], mode="sep_q")
    assert np.array_equal(qs[1], d1)


def test_greedy_single_agent_tie_break():
    qset = QValueSet(q=[np.array([[0.1, 0.9, 0.3]])], deltas=[np.zeros((1, 3))], levels=[0])
    assert greedy_actions(qset, 0)[0] == 1
    tie = QValueSet(q=[np.ones((1, 3))], deltas=[np.zeros((1, 3))], levels=[0])
    assert greedy_actions(tie, 0)[0] == 0


def make_ma_qset(values, occupied):
    values = np.asarray(values, dtype=float)[None]
    occ = np.asarray(occupied, dtype=bool)[None]
    return QValueSet(
        q=[values],
        deltas=[np.zeros_like(values)],
        levels=[0],
        vhat=np.zeros(1),
        occupied=[occ],
    )


def test_joint_value_single_group():
    qset = make_ma_qset([[0.7, 0.2]], [True])
    chosen = np.array([[0]])
    assert joint_value(qset, 0, chosen)[0] == pytest.approx(0.7)


def test_joint_value_mean_of_two_groups():
    qset = make_ma_qset([[0.2, 0.0], [0.4, 0.0]], [True, True])
    chosen = np.array([[0, 0]])
    assert joint_value(qset, 0, chosen)[0] == pytest.approx(0.3)


def test_joint_value_excludes_empty_groups():
    qset = make_ma_qset([[0.3, 0.0], [9.9, 9.9], [0.6, 0.0]], [True, False, True])
    chosen = np.array([[0, -1, 0]])
    assert joint_value(qset, 0, chosen)[0] == pytest.approx(0.45)


def test_joint_value_all_empty_raises():
    qset = make_ma_qset([[0.3, 0.0]], [False])
    with pytest.raises(UsageError):
        joint_value(qset, 0, np.array([[0]]))


def test_greedy_profile_maximises_joint_mean_brute_force():
    # 2 groups x 3 actions: per-group argmax must attain the max joint mean
    rng = np.random.default_rng(11)
    for _ in range(20):
        vals = rng.normal(size=(2, 3))
        qset = make_ma_qset(vals, [True, True])
        prof = greedy_actions(qset, 0)[0]
        best = max(
            (vals[0, a] + vals[1, b]) / 2 for a in range(3) for b in range(3)
        )
        got = joint_value(qset, 0, prof[None, :])[0]
        assert got == pytest.approx(best)


# ------------------------------------------------------------- control model

@pytest.fixture
def control_model():
    h = build_force_ladder(2)
    return ControlValueModel(h, feature_dim=3, rng=np.random.default_rng(5))


def test_control_composition_identity_bit_exact(control_model):
    h = control_model.hierarchy
    rng = np.random.default_rng(1)
    x = rng.normal(size=(16, 3)).astype(np.float32)
    qset = control_model.forward(x)
    for l in range(1, 3):
        assert np.array_equal(qset.q[l], qset.q[l - 1][:, h.parents[l]] + qset.deltas[l])
    assert np.array_equal(qset.q[0], qset.deltas[0])


def test_control_zeroed_deltas_inherit_level0(control_model):
    h = control_model.hierarchy
    for l in (1, 2):
        control_model.evaluators[l].zero_()
    x = np.random.default_rng(2).normal(size=(4, 3)).astype(np.float32)
    qset = control_model.forward(x)
    for l in (1, 2):
        for aid in range(h.size(l)):
            root = h.ancestor_chain(l, aid)[0]
            assert np.allclose(qset.q[l][:, aid], qset.q[0][:, root])


def test_control_sep_q_identity():
    h = build_force_ladder(2)
    m = ControlValueModel(h, feature_dim=3, mode="sep_q", rng=np.random.default_rng(5))
    x = np.random.default_rng(1).normal(size=(8, 3)).astype(np.float32)
    qset = m.forward(x)
    for l in range(3):
        # no state-value head in the control setting: the base is zero
        assert np.array_equal(qset.q[l], qset.deltas[l])


def test_control_delta_heads_start_small(control_model):
    for ev in control_model.evaluators:
        assert np.max(np.abs(ev.layers[-1].weight)) < 0.05


def test_control_gradient_flow_reaches_lower_heads_and_encoder(control_model):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 3)).astype(np.float32)
    qset = control_model.forward(x, remember=True)
    dq = [np.zeros_like(q) for q in qset.q]
    dq[2][:, 3] = 1.0  # loss only on a level-2 value
    grads = control_model.backward(dq)
    named = list(zip(control_model.subnets(), [None] * 7))
    # encoder grads nonzero
    assert any(np.any(g != 0) for g in grads[:4])
    # every evaluator receives gradient through the composition
    per_net = []
    i = 0
    for net in control_model.subnets():
        k = len(net.parameters())
        per_net.append(grads[i : i + k])
        i += k
    eval_grads = per_net[4:]
    assert all(any(np.any(g != 0) for g in gs) for gs in eval_grads)


def test_control_backward_matches_finite_differences(rng):
    h = build_force_ladder(2)
    m = ControlValueModel(
        h, feature_dim=3, rng=rng, dtype=np.float64, encoder_widths=(16, 12), head_width=10
    )
    randomize_biases(m.subnets(), rng)
    x = rng.normal(size=(3, 3))
    w = [rng.normal(size=(3, h.size(l))) for l in range(3)]
    qset = m.forward(x, remember=True)
    grads = m.backward(w)

    def loss():
        qs = m.forward(x)
        return float(sum((qs.q[l] * w[l]).sum() for l in range(3)))

    finite_diff_check(m.parameters(), grads, loss, rng)


def test_control_scratch_single_level():
    h = restrict_to_top(build_force_ladder(2))
    m = ControlValueModel(h, feature_dim=3, rng=np.random.default_rng(0))
    qset = m.forward(np.zeros((1, 3), dtype=np.float32))
    assert len(qset.q) == 1
    assert qset.q[0].shape == (1, 8)


def test_control_clone_is_independent(control_model):
    x = np.random.default_rng(4).normal(size=(2, 3)).astype(np.float32)
    dup = control_model.clone()
    ref = dup.forward(x).q[2].copy()
    control_model.encoder.layers[0].weight += 1.0
    assert np.array_equal(dup.forward(x).q[2], ref)


# ---------------------------------------------------------- multi-agent model

def random_battle_inputs(rng, b=3, n_ally=6, n_enemy=4, depth=2, dtype=np.float64):
    u = n_ally + n_enemy
    f = 7 + 2**depth
    feats = rng.normal(size=(b, u, f)).astype(dtype)
    alive = np.ones((b, u), dtype=bool)
    gidx = np.full((b, depth + 1, u), -1)
    for bi in range(b):
        for ui in range(n_ally):
            g = rng.integers(2**depth)
            for l in range(depth + 1):
                gidx[bi, l, ui] = g >> (depth - l)
    return feats, alive, gidx


@pytest.fixture
def ma_model():
    return MultiAgentValueModel(
        tree_depth=2, feature_dim=7 + 4, rng=np.random.default_rng(7), dtype=np.float64
    )


def test_ma_composition_identities_bit_exact(ma_model, rng):
    feats, alive, gidx = random_battle_inputs(rng)
    qset = ma_model.forward(feats, alive, gidx)
    assert np.array_equal(qset.q[0], qset.vhat[:, None, None] + qset.deltas[0])
    for j in (1, 2):
        parents = np.arange(2**j) >> 1
        assert np.array_equal(qset.q[j], qset.q[j - 1][:, parents, :] + qset.deltas[j])


def test_ma_sep_q_identity(rng):
    m = MultiAgentValueModel(
        tree_depth=2, feature_dim=11, mode="sep_q", rng=np.random.default_rng(7),
        dtype=np.float64,
    )
    feats, alive, gidx = random_battle_inputs(rng)
    qset = m.forward(feats, alive, gidx)
    for j in range(3):
        assert np.array_equal(qset.q[j], qset.vhat[:, None, None] + qset.deltas[j])


def test_ma_zeroed_deltas_equal_state_value(ma_model, rng):
    for ev in ma_model.evaluators:
        ev.zero_()
    feats, alive, gidx = random_battle_inputs(rng)
    qset = ma_model.forward(feats, alive, gidx)
    for j in range(3):
        occ = qset.occupied[j]
        vals = qset.q[j][occ]
        expect = np.repeat(qset.vhat, occ.sum(axis=1))
        assert np.allclose(vals, expect[:, None])


def test_ma_single_unit_group_embedding_equals_state(rng):
    m = MultiAgentValueModel(
        tree_depth=1, feature_dim=9, rng=np.random.default_rng(2), dtype=np.float64
    )
    feats = rng.normal(size=(1, 1, 9))
    alive = np.ones((1, 1), dtype=bool)
    gidx = np.zeros((1, 2, 1), dtype=int)
    qset = m.forward(feats, alive, gidx)
    assert qset.occupied[0][0, 0] and qset.occupied[1].sum() == 1
    # with one alive unit every occupied group's pooled embedding degenerates
    # to the state embedding, so each residual equals its evaluator applied to
    # the state embedding twice over
    state_emb = m.unit_net.forward(feats[0])
    eval_in = np.concatenate([state_emb, state_emb], axis=1)
    g = int(np.nonzero(qset.occupied[1][0])[0][0])
    assert np.allclose(qset.deltas[0][0, 0], m.evaluators[0].forward(eval_in)[0])
    assert np.allclose(qset.deltas[1][0, g], m.evaluators[1].forward(eval_in)[0])


def test_ma_permutation_invariance(ma_model, rng):
    feats, alive, gidx = random_battle_inputs(rng)
    qset = ma_model.forward(feats, alive, gidx)
    perm = rng.permutation(feats.shape[1])
    qp = ma_model.forward(feats[:, perm], alive[:, perm], gidx[:, :, perm])
    for j in range(3):
        assert np.allclose(qp.q[j], qset.q[j], atol=1e-10)
    assert np.allclose(qp.vhat, qset.vhat, atol=1e-10)


def test_ma_dead_units_do_not_influence_outputs(ma_model, rng):
    feats, alive, gidx = random_battle_inputs(rng, b=1)
    alive2 = alive.copy()
    alive2[0, -1] = False
    gidx2 = gidx.copy()
    feats2 = feats.copy()
    feats2[0, -1] = 999.0  # garbage in a dead slot must not matter
    a = ma_model.forward(feats2, alive2, gidx2)
    feats3 = feats.copy()
    feats3[0, -1] = -999.0
    b = ma_model.forward(feats3, alive2, gidx2)
    for j in range(3):
        assert np.allclose(a.q[j], b.q[j])


def test_ma_empty_state_raises(ma_model):
    feats = np.zeros((1, 3, 11))
    alive = np.zeros((1, 3), dtype=bool)
    gidx = np.full((1, 3, 3), -1)
    with pytest.raises(UsageError):
        ma_model.forward(feats, alive, gidx)


def test_ma_backward_matches_finite_differences(rng):
    m = MultiAgentValueModel(
        tree_depth=1,
        feature_dim=9,
        rng=np.random.default_rng(3),
        dtype=np.float64,
        embed_widths=(12, 8),
        eval_width=10,
    )
    randomize_biases(m.subnets(), rng)
    feats, alive, gidx = random_battle_inputs(rng, b=2, n_ally=4, n_enemy=3, depth=1)
    alive[0, 2] = False
    gidx[0, :, 2] = -1
    w = [rng.normal(size=(2, 2**j, 17)) for j in range(2)]
    qset = m.forward(feats, alive, gidx, remember=True)
    occ = [qset.occupied[j][:, :, None] for j in range(2)]
    w = [w[j] * occ[j] for j in range(2)]  # loss only on occupied groups
    grads = m.backward(w)

    def loss():
        qs = m.forward(feats, alive, gidx)
        return float(sum((qs.q[j] * w[j]).sum() for j in range(2)))

    finite_diff_check(m.parameters(), grads, loss, rng)


def test_ma_scratch_exposes_single_level(rng):
    m = MultiAgentValueModel(
        tree_depth=2,
        feature_dim=11,
        exposed_levels=[2],
        rng=np.random.default_rng(1),
        dtype=np.float64,
    )
    feats, alive, gidx = random_battle_inputs(rng)
    qset = m.forward(feats, alive, gidx)
    assert qset.n_levels == 1
    assert qset.q[0].shape[1] == 4
    assert np.array_equal(qset.q[0], qset.vhat[:, None, None] + qset.deltas[0])


def test_ma_validation():
    with pytest.raises(ConfigError):
        MultiAgentValueModel(tree_depth=2, feature_dim=11, exposed_levels=[2, 1])
    with pytest.raises(ConfigError):
        MultiAgentValueModel(tree_depth=2, feature_dim=11, exposed_levels=[3])
    with pytest.raises(ConfigError):
        MultiAgentValueModel(tree_depth=2, feature_dim=11, mode="dueling")
