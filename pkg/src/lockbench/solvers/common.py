"""Shared pieces of the neural solvers: state interning and network-backed policies.

Lock-family datasets repeat the same few states many times, so solvers intern
states into a :class:`StateTable` and run each mini-batch forward pass on the
distinct states only. Per-sample output gradients are summed per distinct
state before backpropagation, which gives the same gradient as the naive
batch up to summation order.
"""
from __future__ import annotations

import numpy as np

from ..mdp import DeterministicPolicy, Policy, Rollout
from ..nn import MlpParams, backward, encode_states, forward, predict, softmax


class StateTable:
    """Interns ``(t, x)`` states to dense integer ids."""

    def __init__(self, H: int, n: int):
        self.H, self.n = H, n
        self._index: dict = {}
        self._t: list = []
        self._rows: list = []
        self._T = np.empty(0, dtype=np.intp)
        self._X = np.empty((0, n))
        self._dirty = False

    def __len__(self):
        return len(self._t)

    def add(self, t: int, X: np.ndarray) -> np.ndarray:
        """Ids for the rows of ``X`` (all at time ``t``), inserting new states."""
        uniq, inv = np.unique(np.asarray(X, dtype=np.float64), axis=0, return_inverse=True)
        ids = np.empty(len(uniq), dtype=np.int64)
        for j, row in enumerate(uniq):
            key = (t, row.tobytes())
            i = self._index.get(key)
            if i is None:
                i = len(self._t)
                self._index[key] = i
                self._t.append(t)
                self._rows.append(row)
                self._dirty = True
            ids[j] = i
        return ids[inv.reshape(-1)]

    def add_rollout(self, ro: Rollout) -> np.ndarray:
        """``(n, H+1)`` id matrix for every state of every trajectory."""
        return np.stack([self.add(t, ro.states[:, t]) for t in range(ro.horizon + 1)], axis=1)

    def _sync(self):
        if self._dirty:
            self._T = np.asarray(self._t, dtype=np.intp)
            self._X = np.stack(self._rows)
            self._dirty = False

    @property
    def times(self) -> np.ndarray:
        self._sync()
        return self._T

    @property
    def states(self) -> np.ndarray:
        self._sync()
        return self._X

    def encode(self, ids: np.ndarray, dtype=np.float64) -> np.ndarray:
        self._sync()
        return encode_states(self._T[ids], self._X[ids], self.H, dtype=dtype)


def scatter_rows(inv: np.ndarray, g: np.ndarray, n_rows: int) -> np.ndarray:
    """Sum per-sample rows of ``g`` into ``n_rows`` buckets given by ``inv``."""
    out = np.empty((n_rows, g.shape[1]), dtype=g.dtype)
    for c in range(g.shape[1]):
        out[:, c] = np.bincount(inv, weights=g[:, c], minlength=n_rows)
    return out


def dedup_grad(params: MlpParams, inputs_u: np.ndarray, inv: np.ndarray, sample_grad):
    """Forward on distinct inputs, per-sample output grads, summed backprop.

    ``sample_grad(outputs_per_sample) -> (value, d value / d outputs)``.
    """
    out_u, cache = forward(params, inputs_u)
    value, g = sample_grad(out_u[inv])
    G = scatter_rows(inv, np.asarray(g, dtype=params.dtype), len(out_u))
    return value, backward(params, cache, G)


def batched_predict(params: MlpParams, X: np.ndarray, chunk: int = 16384) -> np.ndarray:
    return np.concatenate([predict(params, X[i:i + chunk]) for i in range(0, len(X), chunk)])


def _distinct_predict(params: MlpParams, t: int, X: np.ndarray, H: int) -> np.ndarray:
    uniq, inv = np.unique(X, axis=0, return_inverse=True)
    out = predict(params, encode_states(t, uniq, H, dtype=params.dtype))
    return out[inv.reshape(-1)]


class GreedyQPolicy(DeterministicPolicy):
    """``argmax_a Q(s, a)``; ties go to action 0."""

    def __init__(self, params: MlpParams, H: int):
        self.params, self.H = params, H

    def q_values(self, t, X):
        return _distinct_predict(self.params, t, X, self.H)

    def choose(self, t, X):
        return np.argmax(self.q_values(t, X), axis=1).astype(np.int8)


class EpsGreedyQPolicy(Policy):
    def __init__(self, params: MlpParams, H: int, epsilon: float):
        self.greedy = GreedyQPolicy(params, H)
        self.epsilon = epsilon

    def action_distribution(self, state):
        a = int(self.greedy.choose(state.t, state.x[None, :])[0])
        p = [self.epsilon / 2] * 2
        p[a] += 1.0 - self.epsilon
        return tuple(p)

    def act_batch(self, t, X, rng):
        a = self.greedy.choose(t, X)
        explore = rng.random(len(X)) < self.epsilon
        a[explore] = rng.integers(0, 2, size=int(explore.sum()), dtype=np.int8)
        return a


class SoftmaxPolicy(Policy):
    """Samples from ``softmax(net(s))``; ``greedy=True`` takes the argmax instead."""

    def __init__(self, params: MlpParams, H: int, greedy: bool = False):
        self.params, self.H, self.greedy = params, H, greedy

    def probs_batch(self, t, X):
        return softmax(_distinct_predict(self.params, t, X, self.H).astype(np.float64))

    def action_distribution(self, state):
        p = self.probs_batch(state.t, state.x[None, :])[0]
        if self.greedy:
            return (1.0, 0.0) if p[0] >= p[1] else (0.0, 1.0)
        return float(p[0]), float(p[1])

    def act_batch(self, t, X, rng):
        p = self.probs_batch(t, X)
        if self.greedy:
            return np.argmax(p, axis=1).astype(np.int8)
        return (rng.random(len(X)) >= p[:, 0]).astype(np.int8)

    def act(self, state, rng):
        return int(self.act_batch(state.t, state.x[None, :], rng)[0])
