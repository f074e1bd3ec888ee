import numpy as np
import pytest

from lockbench.bench.runner import evaluate_success
from lockbench.lock import LockSpec, goal_state, make_lock_mdp
from lockbench.mdp import FixedWordPolicy, State, UniformPolicy, rollout
from lockbench.nn import predict
from lockbench.solvers import (FqiConfig, GcNeuralConfig, PpoConfig, erm_l0, fqi, gc_exact, gc_neural, ppo)
from lockbench.solvers.common import StateTable, dedup_grad
from lockbench.solvers.gc import gc_slices, select_goal
from lockbench.solvers.ppo import returns_to_go
from lockbench.nn import backward, cross_entropy_loss, forward, mlp_init


def recount(Z, y):
    errs = []
    for j in range(Z.shape[1]):
        for sign in (1, -1):
            errs.append(int(np.sum((sign * Z[:, j] > 0).astype(int) != y)))
    return errs


def test_erm_trivial_examples():
    Z = np.array([[0, 1], [0, 0], [1, 0], [1, 1]], dtype=float)
    h = erm_l0(Z, np.array([1, 0, 0, 1]))
    assert (h.feature, h.sign, h.errors) == (1, 1, 0)
    h = erm_l0(np.zeros((4, 3)), np.array([1, 0, 1, 1]))
    assert h.error_rate == 0.75 and (h.feature, h.sign) == (0, 1)


def test_erm_errors():
    with pytest.raises(ValueError):
        erm_l0(np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(NotImplementedError):
        erm_l0(np.zeros((2, 3)), np.zeros(2), alpha=2)


def test_erm_tie_break_prefers_low_feature_then_plus(rng):
    Z = np.array([[1.0, 1.0], [-1.0, -1.0]])
    h = erm_l0(Z, np.array([1, 0]))
    assert (h.feature, h.sign) == (0, 1)
    h = erm_l0(-Z, np.array([1, 0]))
    assert (h.feature, h.sign) == (0, -1)


def test_erm_is_global_minimum(rng):
    for _ in range(20):
        Z = rng.choice([-1.0, 0.0, 1.0], size=(int(rng.integers(1, 40)), int(rng.integers(1, 8))))
        y = rng.integers(0, 2, len(Z))
        errs = recount(Z, y)
        h = erm_l0(Z, y)
        assert h.errors == min(errs) and errs.index(min(errs)) == 2 * h.feature + (h.sign == -1)


def test_lock_slice_is_perfect_on_right_branch():
    rng = np.random.default_rng(0)
    mdp = make_lock_mdp(LockSpec.random(6, rng))
    ro = rollout(mdp, UniformPolicy(), 1000, rng)
    sl = gc_slices(ro)[2]
    h = erm_l0(sl.inputs, sl.labels)
    right = ro.states[:, 1, mdp.layout.c] == 1
    assert np.all(h.predict(sl.inputs[right]) == sl.labels[right])


def test_goal_selection():
    rng = np.random.default_rng(1)
    spec = LockSpec.random(5, rng)
    ro = rollout(make_lock_mdp(spec), UniformPolicy(), 200, rng)
    assert ro.rewards[:, -1].max() == 1.0
    assert np.array_equal(select_goal(ro), goal_state(spec).x)


def test_gc_exact_single_trajectory_is_defined():
    for seed in range(6):
        rng = np.random.default_rng(seed)
        mdp = make_lock_mdp(LockSpec.random(5, rng))
        pol, ro = gc_exact(mdp, 1, 1, rng, return_rollout=True)
        if ro.rewards.sum() == 0:
            assert pol.goal.t == 5
        rollout(mdp, pol, 10, rng)


@pytest.mark.parametrize("H", [5, 10, 20])
def test_gc_predictors_perfect_on_right_branch(H):
    failures = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        spec = LockSpec.random(H, rng)
        mdp = make_lock_mdp(spec)
        pol, ro = gc_exact(mdp, 1000, 1, rng, return_rollout=True)
        right = ro.states[:, 1, mdp.layout.c] == 1
        ok = np.array_equal(pol.goal.x, goal_state(spec).x)
        for t in range(1, H - 1):
            Z = np.concatenate([ro.states[right, t], np.broadcast_to(goal_state(spec).x, (right.sum(), spec.n))], 1)
            # with the true goal the rule must output b_t on every right-branch state
            ok &= np.all(pol.predictors[t].predict(Z) == spec.b[t - 1])
        failures += not ok
    assert failures <= 1


def test_gc_exact_plays_the_word():
    rng = np.random.default_rng(5)
    spec = LockSpec.random(10, rng)
    mdp = make_lock_mdp(spec)
    pol = gc_exact(mdp, 1000, 1, rng)
    for t in range(1, 9):
        X = np.zeros((1, spec.n))
        X[0, mdp.layout.c] = 1
        X[0, mdp.layout.a[:t - 1]] = spec.b[:t - 1]
        assert pol.choose(t, X)[0] == spec.b[t - 1]
    assert evaluate_success(pol, mdp, 1000, np.random.default_rng(0)) == 1


def test_state_table_and_dedup_gradient(rng):
    table = StateTable(3, 2)
    ids = table.add(1, np.array([[0, 1], [0, 1], [1, 0]], dtype=float))
    assert ids[0] == ids[1] != ids[2] and len(table) == 2
    assert table.add(2, np.array([[0, 1]], dtype=float))[0] == 2
    params = mlp_init((6, 4, 2), rng)
    inputs = table.encode(np.arange(3))
    inv = rng.integers(0, 3, 12)
    y = rng.integers(0, 2, 12)
    loss_d, g_d = dedup_grad(params, inputs, inv, lambda out: cross_entropy_loss(out, y))
    out, cache = forward(params, inputs[inv])
    loss, dout = cross_entropy_loss(out, y)
    assert np.isclose(loss, loss_d) and np.allclose(backward(params, cache, dout).flat, g_d.flat, atol=1e-14)


def test_returns_to_go():
    assert returns_to_go(np.array([[0.0, 1.0, 2.0]])).tolist() == [[3.0, 3.0, 2.0]]


def small_fqi():
    return FqiConfig(K=8, I=100, hidden=(32, 32), steps=200, lr=3e-3)


def test_fqi_bellman_fixed_point():
    rng = np.random.default_rng(0)
    spec = LockSpec.random(4, rng)
    mdp = make_lock_mdp(spec)
    pol = fqi(mdp, small_fqi(), rng)
    x = np.zeros(spec.n)
    x[mdp.layout.c] = 1
    x[mdp.layout.a] = spec.b
    wrong = x.copy()
    wrong[mdp.layout.a[0]] = 1 - spec.b[0]
    q = pol.q_values(3, np.stack([x, wrong]))
    assert abs(q[0].max() - 1.0) <= 0.2 and abs(q[1].max()) <= 0.2


def test_fqi_is_deterministic_and_validates():
    cfg = FqiConfig(K=2, I=20, hidden=(8,), steps=10)
    mdp = make_lock_mdp(LockSpec.from_bits(5, "010"))
    a = fqi(mdp, cfg, np.random.default_rng(3))
    b = fqi(mdp, cfg, np.random.default_rng(3))
    assert np.array_equal(a.params.flat, b.params.flat)
    with pytest.raises(ValueError):
        fqi(mdp, FqiConfig(epsilon=1.5), np.random.default_rng(0))


def test_fqi_history_tracks_cumulative_dataset():
    hist = []
    fqi(make_lock_mdp(LockSpec.from_bits(4, "11")), FqiConfig(K=3, I=10, hidden=(8,), steps=5),
        np.random.default_rng(0), hist)
    assert [h["dataset"] for h in hist] == [40, 80, 120]


def test_ppo_small_run_learns_h4():
    rng = np.random.default_rng(2)
    mdp = make_lock_mdp(LockSpec.random(4, rng))
    hist = []
    pol = ppo(mdp, PpoConfig(K=6, I=100, hidden=(32, 32), steps=50, lr=3e-3), rng, hist)
    assert hist[-1]["train_reward"] > hist[0]["train_reward"]
    assert evaluate_success(pol, mdp, 200, np.random.default_rng(0)) == 1


def test_ppo_is_deterministic_and_validates():
    cfg = PpoConfig(K=2, I=20, hidden=(8,), steps=5)
    mdp = make_lock_mdp(LockSpec.from_bits(5, "110"))
    a = ppo(mdp, cfg, np.random.default_rng(9))
    b = ppo(mdp, cfg, np.random.default_rng(9))
    assert np.array_equal(a.params.flat, b.params.flat)
    with pytest.raises(ValueError):
        ppo(mdp, PpoConfig(clip=1.0), np.random.default_rng(0))


def test_gc_neural_dataset_and_loss_decrease():
    rng = np.random.default_rng(0)
    mdp = make_lock_mdp(LockSpec.random(6, rng))
    trace = []
    pol = gc_neural(mdp, GcNeuralConfig(I=200, hidden=(32, 32), steps=100, lr=1e-2, n_batches=10), rng, trace)
    assert pol.n_train == 200 * 6
    assert np.mean(trace[-10:]) < np.mean(trace[:10])


def test_gc_neural_solves_small_horizon_and_is_deterministic():
    cfg = GcNeuralConfig(I=300, hidden=(64, 64), steps=1500, lr=5e-3, n_batches=20)
    mdp = make_lock_mdp(LockSpec.from_bits(8, "011010"))
    a = gc_neural(mdp, cfg, np.random.default_rng(1))
    b = gc_neural(mdp, cfg, np.random.default_rng(1))
    assert np.array_equal(a.params.flat, b.params.flat)
    assert evaluate_success(a, mdp, 1000, np.random.default_rng(0)) == 1
    sampled = gc_neural(mdp, GcNeuralConfig(I=20, hidden=(8,), steps=5, sample=True), np.random.default_rng(1))
    assert 0.0 <= sampled.action_distribution(State(1, np.zeros(mdp.state_dim)))[0] <= 1.0
