"""Proximal policy optimisation with returns-to-go and a frozen value baseline.

No GAE, no advantage normalisation: the advantage is ``R_t - V_bar(s_t)``
with ``V_bar`` frozen at the start of the iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import Mdp, rollout
from ..nn import (AdamWState, BatchSchedule, adamw_step, backward, forward, mlp_init, mse_loss,
                  ppo_objective, softmax)
from .common import SoftmaxPolicy, StateTable, batched_predict, scatter_rows


@dataclass
class PpoConfig:
    K: int = 50
    I: int = 1000
    clip: float = 0.2
    beta: float = 1e-3
    hidden: tuple = (512, 512)
    steps: int = 500
    lr: float = 2e-3
    weight_decay: float = 1e-8
    n_batches: int = 10
    greedy_eval: bool = False  # the returned policy samples by default
    dtype: str = "float64"


def returns_to_go(rewards: np.ndarray) -> np.ndarray:
    return np.flip(np.cumsum(np.flip(rewards, axis=1), axis=1), axis=1)


def ppo(mdp: Mdp, cfg: PpoConfig, rng: np.random.Generator, history: list | None = None):
    if cfg.K < 1 or cfg.I < 1:
        raise ValueError("K and I must be >= 1")
    if not 0.0 < cfg.clip < 1.0:
        raise ValueError("clip must lie in (0, 1)")
    H = mdp.horizon
    dtype = np.dtype(cfg.dtype)
    d = H + 1 + mdp.state_dim
    pi = mlp_init((d, *cfg.hidden, 2), rng, dtype=dtype)
    V = mlp_init((d, *cfg.hidden, 1), rng, dtype=dtype)
    opt_pi = AdamWState.for_params(pi, cfg.lr, cfg.weight_decay)
    opt_v = AdamWState.for_params(V, cfg.lr, cfg.weight_decay)
    for k in range(cfg.K):
        ro = rollout(mdp, SoftmaxPolicy(pi, H), cfg.I, rng)
        table = StateTable(H, mdp.state_dim)
        s = table.add_rollout(ro)[:, :H].ravel()
        a = ro.actions.ravel().astype(np.intp)
        R = returns_to_go(ro.rewards).ravel()

        enc_all = table.encode(np.arange(len(table)), dtype)
        old_probs = softmax(batched_predict(pi, enc_all).astype(np.float64))[s, a]
        adv = R - batched_predict(V, enc_all)[:, 0].astype(np.float64)[s]

        sched = BatchSchedule(len(s), cfg.n_batches, rng)
        for _ in range(cfg.steps):
            idx = sched.next()
            uniq, inv = np.unique(s[idx], return_inverse=True)
            Z = enc_all[uniq]
            logits, cache = forward(pi, Z)
            obj, g = ppo_objective(logits[inv].astype(np.float64), a[idx], adv[idx], old_probs[idx],
                                   cfg.clip, cfg.beta)
            adamw_step(pi, backward(pi, cache, -scatter_rows(inv, g.astype(dtype), len(uniq))), opt_pi)
            v, cache = forward(V, Z)
            v_loss, gv = mse_loss(v[inv, 0], R[idx])
            adamw_step(V, backward(V, cache, scatter_rows(inv, gv[:, None].astype(dtype), len(uniq))), opt_v)
        if history is not None:
            history.append({"iteration": k, "objective": obj, "value_loss": v_loss,
                            "train_reward": float(ro.rewards.sum(axis=1).mean())})
    return SoftmaxPolicy(pi, H, greedy=cfg.greedy_eval)
