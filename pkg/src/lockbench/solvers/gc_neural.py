"""Goal-conditioned learner with an MLP action classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import Mdp, Policy, State, UniformPolicy, rollout
from ..nn import AdamWState, BatchSchedule, adamw_step, cross_entropy_loss, encode_states, mlp_init, predict, softmax
from .common import StateTable, dedup_grad
from .gc import select_goal


@dataclass
class GcNeuralConfig:
    I: int = 1000
    hidden: tuple = (256, 256)
    steps: int = 30000
    lr: float = 2e-2
    weight_decay: float = 1e-3
    n_batches: int = 100
    sample: bool = False  # act by sampling the softmax instead of argmax
    dtype: str = "float64"


class GcNeuralPolicy(Policy):
    def __init__(self, params, H: int, goal: State, sample: bool = False):
        self.params, self.H, self.goal, self.sample = params, H, goal, sample
        self._goal_code = encode_states(H, goal.x[None, :], H, dtype=params.dtype)[0]

    def probs_batch(self, t, X):
        uniq, inv = np.unique(np.atleast_2d(X), axis=0, return_inverse=True)
        enc = encode_states(t, uniq, self.H, dtype=self.params.dtype)
        Z = np.concatenate([enc, np.broadcast_to(self._goal_code, enc.shape)], axis=1)
        return softmax(predict(self.params, Z).astype(np.float64))[inv.reshape(-1)]

    def action_distribution(self, state):
        p = self.probs_batch(state.t, state.x[None, :])[0]
        if not self.sample:
            return (1.0, 0.0) if p[0] >= p[1] else (0.0, 1.0)
        return float(p[0]), float(p[1])

    def act_batch(self, t, X, rng):
        p = self.probs_batch(t, X)
        if not self.sample:
            return np.argmax(p, axis=1).astype(np.int8)
        return (rng.random(len(p)) >= p[:, 0]).astype(np.int8)

    def act(self, state, rng):
        return int(self.act_batch(state.t, state.x[None, :], rng)[0])


def gc_neural(mdp: Mdp, cfg: GcNeuralConfig, rng: np.random.Generator, loss_trace: list | None = None):
    if cfg.I < 1:
        raise ValueError("I must be >= 1")
    H = mdp.horizon
    dtype = np.dtype(cfg.dtype)
    ro = rollout(mdp, UniformPolicy(), cfg.I, rng)
    goal = State(H, select_goal(ro))
    table = StateTable(H, mdp.state_dim)
    ids = table.add_rollout(ro)
    src = ids[:, :H].ravel()
    dst = np.repeat(ids[:, H], H)
    labels = ro.actions.ravel().astype(np.intp)
    M = np.int64(max(len(table), 1))
    pair = src * M + dst

    d = H + 1 + mdp.state_dim
    params = mlp_init((2 * d, *cfg.hidden, 2), rng, dtype=dtype)
    opt = AdamWState.for_params(params, cfg.lr, cfg.weight_decay)
    sched = BatchSchedule(len(labels), cfg.n_batches, rng)
    for _ in range(cfg.steps):
        idx = sched.next()
        uniq, inv = np.unique(pair[idx], return_inverse=True)
        Z = np.concatenate([table.encode(uniq // M, dtype), table.encode(uniq % M, dtype)], axis=1)
        y = labels[idx]
        loss, grads = dedup_grad(params, Z, inv, lambda out: cross_entropy_loss(out, y))
        adamw_step(params, grads, opt)
        if loss_trace is not None:
            loss_trace.append(loss)
    policy = GcNeuralPolicy(params, H, goal, cfg.sample)
    policy.n_train = len(labels)
    return policy
