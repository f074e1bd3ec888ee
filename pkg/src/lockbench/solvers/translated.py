"""Model-free learners written against the obfuscated interface.

Both learners see next states only through evaluation functions that retrain
a small network on a chunk of the session dataset. The networks are trained
by per-sample SGD on ``D_{n-1}``, the last complete chunk of ``I`` records.
With fewer than ``I`` records the freshly initialised network is used as is.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..env import CoordPermutation, DataRecord, TERMINAL
from ..mdp import Policy, State
from ..nn import (MlpParams, backward, encode_states, forward, lift_permutation, log_softmax, mlp_init,
                  permute_first_layer, predict, sgd_sequential, softmax)


def last_full_chunk(records: Sequence[DataRecord], size: int) -> tuple[int, list]:
    """Index and contents of the last complete chunk, or ``(-1, [])``."""
    q = len(records) // size
    if q == 0:
        return -1, []
    return q - 1, records[(q - 1) * size:q * size]


class ChunkNet:
    """Evaluation function ``f(s, D) = net_D(s)[output]``.

    ``net_D`` starts from a fixed seeded initialisation and takes one SGD
    pass over the last full chunk of ``D`` with targets from ``target(payload)``
    on output ``action(payload)``. Trained nets are cached per dataset chunk.
    """

    def __init__(self, H: int, n: int, output: int, n_out: int, chunk: int, lr: float,
                 hidden: tuple, seed, target, action=None, perm: CoordPermutation | None = None):
        self.H, self.n, self.output, self.n_out = H, n, output, n_out
        self.chunk, self.lr, self.hidden, self.seed = chunk, lr, tuple(hidden), seed
        self.target, self.action, self.perm = target, action, perm
        self._cache: dict = {}
        self.trainings = 0

    def permuted(self, p: CoordPermutation) -> "ChunkNet":
        """Coupled twin: same randomness with first-layer rows relabelled by ``p``."""
        perm = p if self.perm is None else p @ self.perm
        return ChunkNet(self.H, self.n, self.output, self.n_out, self.chunk, self.lr, self.hidden,
                        self.seed, self.target, self.action, perm)

    def initial(self) -> MlpParams:
        params = mlp_init((self.H + 1 + self.n, *self.hidden, self.n_out), np.random.default_rng(self.seed))
        if self.perm is not None:
            params = permute_first_layer(params, lift_permutation(self.perm, self.H))
        return params

    def trained(self, records: Sequence[DataRecord]) -> MlpParams:
        q, part = last_full_chunk(records, self.chunk)
        base = getattr(records, "_records", None)
        key = (id(base), getattr(records, "epoch", None), q) if base is not None else None
        if key is not None and key in self._cache:
            return self._cache[key][1]
        params = self.initial()
        if part:
            X = np.concatenate([encode_states(r.s.t, r.s.x[None, :], self.H) for r in part])
            out = np.array([0 if self.action is None else self.action(r.payload) for r in part])
            y = np.array([self.target(r.payload) for r in part], dtype=np.float64)
            sgd_sequential(params, X, out, y, self.lr)
            self.trainings += 1
        if key is not None:
            # keep ``base`` alive so its id cannot be reused while cached
            self._cache = {key: (base, params)}
        return params

    def __call__(self, s: State, records: Sequence[DataRecord]) -> float:
        params = self.trained(records)
        return float(predict(params, encode_states(s.t, s.x[None, :], self.H))[0, self.output])


def _q_target(payload):
    a, r, f = payload
    return r + max(f)


def _v_target(payload):
    r, f = payload
    return r + f[0]


# ---------------------------------------------------------------------------
# fitted Q-iteration


@dataclass
class TranslatedConfig:
    K: int = 2
    I: int = 12  # dataset records per chunk
    eta: float = 0.05
    hidden: tuple = (16,)
    seed: int = 0  # initialisation seed of the evaluation networks


@dataclass
class TranslatedRun:
    policy: Policy
    actions: list = field(default_factory=list)
    values: list = field(default_factory=list)  # evaluation vectors seen after each step


def learn_q_functions(H: int, n: int, cfg: TranslatedConfig) -> list[ChunkNet]:
    return [ChunkNet(H, n, a, 2, cfg.I, cfg.eta, cfg.hidden, [cfg.seed, a], _q_target,
                     action=lambda payload: payload[0])
            for a in (0, 1)]


class InterfaceGreedyPolicy(Policy):
    """``argmax_a Env_evaluate_state(s, F)``; ties go to action 0."""

    def __init__(self, session, F):
        self.session, self.F = session, list(F)

    def action_distribution(self, state):
        q = self.session.evaluate_state(state, self.F)
        return (1.0, 0.0) if q[0] >= q[1] else (0.0, 1.0)

    def act(self, state, rng):
        return 0 if self.action_distribution(state)[0] == 1.0 else 1


def fqi_translated(session, cfg: TranslatedConfig, F=None) -> TranslatedRun:
    """Greedy interface FQI over ``K * I / H`` episodes.

    ``F`` defaults to ``learn_q_functions``; pass a coupled twin to compare runs.
    """
    if cfg.K < 1 or cfg.I < 1:
        raise ValueError("K and I must be >= 1")
    H, n = session.horizon, session.state_dim
    F = learn_q_functions(H, n, cfg) if F is None else list(F)
    g = lambda a, r, f: (a, r, tuple(float(v) for v in f))
    run = TranslatedRun(InterfaceGreedyPolicy(session, F))
    for _ in range(max(1, cfg.K * cfg.I // H)):
        _, h, q = session.init(F)
        for _ in range(H):
            a = 0 if q[0] >= q[1] else 1
            res = session.step(h, a, g, F)
            if res is TERMINAL:
                break
            h, q = res.handle, res.evals
            run.actions.append(a)
            run.values.append(q.copy())
    return run


# ---------------------------------------------------------------------------
# actor-critic


class _NetPolicy(Policy):
    def __init__(self, params: MlpParams, H: int):
        self.params, self.H = params, H

    def probs_batch(self, t, X):
        return softmax(predict(self.params, encode_states(t, np.atleast_2d(X), self.H)))

    def action_distribution(self, state):
        p = self.probs_batch(state.t, state.x[None, :])[0]
        return float(p[0]), float(p[1])


def learning_v_function(H: int, n: int, cfg: TranslatedConfig) -> ChunkNet:
    return ChunkNet(H, n, 0, 1, cfg.I, cfg.eta, cfg.hidden, [cfg.seed, 2], _v_target)


def actor_critic_translated(session, cfg: TranslatedConfig, rng: np.random.Generator,
                            F=None, policy_seed: int | None = None) -> TranslatedRun:
    """Interface actor-critic over ``K`` episodes.

    The state fed to the policy is the last one the interface revealed: the
    initial state at ``t = 0`` and afterwards the source state echoed by each
    step. The policy therefore acts one step behind.
    """
    if cfg.K < 1 or cfg.I < 1:
        raise ValueError("K and I must be >= 1")
    H, n = session.horizon, session.state_dim
    F = [learning_v_function(H, n, cfg)] if F is None else list(F)
    seed = cfg.seed if policy_seed is None else policy_seed
    pi = mlp_init((H + 1 + n, *cfg.hidden, 2), np.random.default_rng([seed, 3]))
    g = lambda a, r, f: (r, tuple(float(v) for v in f))
    run = TranslatedRun(_NetPolicy(pi, H))
    for _ in range(cfg.K):
        s, h, _ = session.init(F)
        for _ in range(H):
            z = encode_states(s.t, s.x[None, :], H)
            p = softmax(predict(pi, z))[0]
            a = int(rng.random() >= p[0])
            res = session.step(h, a, g, F)
            if res is TERMINAL:
                break
            s, h, v = res.s, res.handle, res.evals
            run.actions.append(a)
            run.values.append(v.copy())
            scale = res.r + float(v[0])
            if scale != 0.0:
                logits, cache = forward(pi, encode_states(s.t, s.x[None, :], H))
                dlog = -np.exp(log_softmax(logits))
                dlog[0, a] += 1.0
                pi.flat += cfg.eta * scale * backward(pi, cache, dlog).flat
    return run
