import numpy as np
import pytest

from lockbench.bench.checks import indistinguishability_check
from lockbench.env import CoordPermutation, EnvSession, InterfaceView, StepResult, permute_records
from lockbench.lock import LockSpec, make_lock_mdp, permutation_twin, twin_permutation
from lockbench.mdp import Mdp, State
from lockbench.nn import mlp_init
from lockbench.solvers.translated import (ChunkNet, TranslatedConfig, actor_critic_translated, fqi_translated,
                                          last_full_chunk, learn_q_functions)
from lockbench.solvers.tree_search import TreeSearchPolicy, tree_search


def lock_session(bits, seed=0, final_permutation=None):
    spec = LockSpec.from_bits(len(bits) + 2, bits)
    return EnvSession(make_lock_mdp(spec, final_permutation), np.random.default_rng(seed)), spec


def test_chunking():
    recs = list(range(25))
    assert last_full_chunk(recs, 10) == (1, list(range(10, 20)))
    assert last_full_chunk(recs[:9], 10) == (-1, [])
    assert last_full_chunk(recs[:20], 10)[0] == 1


def test_fqi_payloads_and_call_count():
    session, spec = lock_session("1")  # H = 3
    cfg = TranslatedConfig(K=10, I=3)  # K * I / H = 10 episodes
    run = fqi_translated(session, cfg)
    assert session.call_count == 10 * (3 + 1)
    assert len(session.data) == 30 and len(run.actions) == 30
    for rec in session.data:
        a, r, q = rec.payload
        assert a in (0, 1) and r in (0.0, 1.0) and len(q) == 2
    before = session.call_count
    run.policy.act(State(1, np.zeros(spec.n)), None)
    assert session.call_count == before + 1


def test_evaluation_networks_retrain_only_on_new_chunks():
    session, spec = lock_session("10")
    cfg = TranslatedConfig(K=3, I=8)
    F = learn_q_functions(4, spec.n, cfg)
    fqi_translated(session, cfg, F)
    # the final evaluation happens before the last record is appended
    assert F[0].trainings == (len(session.data) - 1) // 8


def test_actor_critic_payloads():
    session, _ = lock_session("01")
    actor_critic_translated(session, TranslatedConfig(K=3, I=4), np.random.default_rng(0))
    assert all(len(rec.payload) == 2 and len(rec.payload[1]) == 1 for rec in session.data)


class ZeroReward(Mdp):
    horizon, state_dim = 3, 2

    def init(self, rng):
        return State(0, np.zeros(2))

    def step(self, state, action, rng):
        return 0.0, State(state.t + 1, np.array([action, 1.0]))

    def is_terminal(self, state):
        return state.t >= 3


def test_actor_critic_zero_advantage_leaves_policy_unchanged():
    cfg = TranslatedConfig(K=1, I=3)
    run = actor_critic_translated(EnvSession(ZeroReward(), np.random.default_rng(0)), cfg,
                                  np.random.default_rng(0), F=[lambda s, D: 0.0])
    init = mlp_init((3 + 1 + 2, 16, 2), np.random.default_rng([0, 3]))
    assert np.array_equal(run.policy.params.flat, init.flat)
    moved = actor_critic_translated(EnvSession(ZeroReward(), np.random.default_rng(0)), cfg,
                                    np.random.default_rng(0), F=[lambda s, D: 1.0])
    assert not np.array_equal(moved.policy.params.flat, init.flat)


def test_chunk_net_twin_matches_on_permuted_inputs(rng):
    session, spec = lock_session("110")
    cfg = TranslatedConfig(K=3, I=10)
    F = learn_q_functions(5, spec.n, cfg)
    fqi_translated(session, cfg, F)
    p = CoordPermutation.random(spec.n, rng)
    twin = F[1].permuted(p)
    pd = permute_records(p, session.data)
    for rec in list(session.data)[:5]:
        assert abs(F[1](rec.s, session.data) - twin(p(rec.s), pd)) < 1e-12
    assert twin.permuted(p.inverse()).perm.is_identity()


@pytest.mark.parametrize("method", ["fqi", "actor_critic"])
def test_twins_are_indistinguishable(method):
    assert indistinguishability_check(method, [0, 1]).passed


def test_uncoupled_twins_do_differ():
    # without the coupled initialisation the evaluations differ
    spec = LockSpec.from_bits(4, "01")
    p = twin_permutation(spec, 1, 2)
    cfg = TranslatedConfig(K=8, I=12)
    a = fqi_translated(EnvSession(make_lock_mdp(spec), np.random.default_rng(1)), cfg)
    b = fqi_translated(EnvSession(permutation_twin(spec, p), np.random.default_rng(1)), cfg)
    assert np.max(np.abs(np.array(a.values) - np.array(b.values))) > 1e-6


class Poisoned(EnvSession):
    """Echoes NaN source states; a learner that ignores coordinates cannot tell."""

    def step(self, h, a, g, F=()):
        res = super().step(h, a, g, F)
        if not res:
            return res
        return StepResult(State(res.s.t, np.full_like(res.s.x, np.nan)), *res[1:])


def test_fqi_never_reads_state_coordinates():
    cfg = TranslatedConfig(K=6, I=12)
    spec = LockSpec.from_bits(4, "10")
    plain = fqi_translated(InterfaceView(EnvSession(make_lock_mdp(spec), np.random.default_rng(2))), cfg)
    poisoned = fqi_translated(InterfaceView(Poisoned(make_lock_mdp(spec), np.random.default_rng(2))), cfg)
    assert plain.actions == poisoned.actions
    assert np.array_equal(np.array(plain.values), np.array(poisoned.values))


def test_actor_critic_runs_behind_interface_view():
    cfg = TranslatedConfig(K=6, I=12)
    spec = LockSpec.from_bits(4, "10")
    a = actor_critic_translated(InterfaceView(EnvSession(make_lock_mdp(spec), np.random.default_rng(2))), cfg,
                                np.random.default_rng(0))
    b = actor_critic_translated(EnvSession(make_lock_mdp(spec), np.random.default_rng(2)), cfg,
                                np.random.default_rng(0))
    assert a.actions == b.actions


# ---------------------------------------------------------------------------
# tree search


def right_state(spec, t, prefix=()):
    x = np.zeros(spec.n)
    x[spec.layout.c] = 1
    x[spec.layout.a[:len(prefix)]] = prefix
    return State(t, x)


@pytest.mark.parametrize("bits", ["00", "01", "10", "11"])
def test_tree_search_finds_the_word(bits):
    session, spec = lock_session(bits)
    pol = TreeSearchPolicy(session, 4, np.random.default_rng(0))
    assert pol.search(right_state(spec, 1)) == spec.b[0]
    assert pol.search(right_state(spec, 2, spec.b[:1])) == spec.b[1]


def test_tree_search_fallback_and_call_bound():
    session, spec = lock_session("0110")
    H_S = 2
    pol = TreeSearchPolicy(session, H_S, np.random.default_rng(0))
    before = session.call_count
    assert pol.search(right_state(spec, 1)) is None
    assert session.call_count - before <= 2 ** (H_S + 1) - 2
    a = pol.act(right_state(spec, 1))
    assert a in (0, 1) and pol.fallbacks == 1
    with pytest.raises(ValueError):
        TreeSearchPolicy(session, 0, np.random.default_rng(0))


def test_tree_search_left_branch_last_step():
    for seed in range(8):
        session, spec = lock_session("01", seed)
        log = []
        orig = session.step

        def spy(h, a, g, F=()):
            res = orig(h, a, g, F)
            log.append((a, res.r))
            return res
        session.step = spy
        got = tree_search(session, session.encode(State(3, np.zeros(spec.n))), 1)
        paid = [a for a, r in log if r == 1.0]
        assert got == (paid[0] if paid else None)
        assert len(log) == (log.index((paid[0], 1.0)) + 1 if paid else 2)
