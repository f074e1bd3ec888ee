"""Fitted Q-iteration with an epsilon-greedy behaviour policy and a cumulative dataset."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import Mdp, rollout
from ..nn import AdamWState, BatchSchedule, adamw_step, mlp_init
from .common import EpsGreedyQPolicy, GreedyQPolicy, StateTable, batched_predict, dedup_grad


@dataclass
class FqiConfig:
    K: int = 50
    I: int = 1000
    epsilon: float = 0.3
    hidden: tuple = (256, 256)
    steps: int = 1000
    lr: float = 3e-4
    weight_decay: float = 5e-5
    batches_per_iteration: int = 20  # each iteration's I trajectories split this many ways
    mask_terminal: bool = True  # False bootstraps from Q at s_H like the bare pseudocode
    dtype: str = "float64"


def fqi(mdp: Mdp, cfg: FqiConfig, rng: np.random.Generator, history: list | None = None):
    if cfg.K < 1 or cfg.I < 1:
        raise ValueError("K and I must be >= 1")
    if not 0.0 <= cfg.epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    H = mdp.horizon
    dtype = np.dtype(cfg.dtype)
    table = StateTable(H, mdp.state_dim)
    params = mlp_init((H + 1 + mdp.state_dim, *cfg.hidden, 2), rng, dtype=dtype)
    opt = AdamWState.for_params(params, cfg.lr, cfg.weight_decay)
    S, A, R, S2, term = [], [], [], [], []
    batch_size = max(1, cfg.I * H // cfg.batches_per_iteration)
    for k in range(cfg.K):
        ro = rollout(mdp, EpsGreedyQPolicy(params, H, cfg.epsilon), cfg.I, rng)
        ids = table.add_rollout(ro)
        S.append(ids[:, :H].ravel())
        S2.append(ids[:, 1:].ravel())
        A.append(ro.actions.ravel().astype(np.intp))
        R.append(ro.rewards.ravel())
        term.append(np.tile(np.arange(H) == H - 1, cfg.I))
        s, s2, a = np.concatenate(S), np.concatenate(S2), np.concatenate(A)
        r, done = np.concatenate(R), np.concatenate(term)

        q_bar = params.copy()
        v_next = batched_predict(q_bar, table.encode(np.arange(len(table)), dtype)).max(axis=1)
        y = r + v_next[s2]
        if cfg.mask_terminal:
            y = np.where(done, r, y)

        sched = BatchSchedule(len(s), max(1, round(len(s) / batch_size)), rng)
        for _ in range(cfg.steps):
            idx = sched.next()
            uniq, inv = np.unique(s[idx], return_inverse=True)
            a_b, y_b = a[idx], y[idx]
            rows = np.arange(len(idx))

            def sample_grad(q):
                diff = q[rows, a_b] - y_b
                g = np.zeros_like(q)
                g[rows, a_b] = 2.0 * diff / len(diff)
                return float(np.mean(diff ** 2)), g

            loss, grads = dedup_grad(params, table.encode(uniq, dtype), inv, sample_grad)
            adamw_step(params, grads, opt)
        if history is not None:
            history.append({"iteration": k, "loss": loss, "dataset": len(s),
                            "train_reward": float(ro.rewards.sum(axis=1).mean())})
    return GreedyQPolicy(params, H)
