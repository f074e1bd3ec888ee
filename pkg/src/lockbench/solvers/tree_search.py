"""Depth-first planning through the interface's transition generator."""
from __future__ import annotations

import numpy as np

from ..env import TERMINAL
from ..mdp import ACTIONS, Policy, State


def tree_search(session, handle, depth: int):
    """First action on a path paying reward 1 within ``depth`` steps, else ``None``."""
    if depth == 0:
        return None
    for a in ACTIONS:
        res = session.step(handle, a, None, [])
        if res is TERMINAL:
            continue
        if res.r == 1:
            return a
        if tree_search(session, res.handle, depth - 1) is not None:
            return a
    return None


class TreeSearchPolicy(Policy):
    """Searches ``min(H_S, H - t)`` steps ahead from each queried state.

    Falls back to a uniform action when no rewarding path turns up.
    """

    def __init__(self, session, H_S: int, rng: np.random.Generator):
        if H_S < 1:
            raise ValueError("H_S must be >= 1")
        self.session, self.H_S, self.rng = session, H_S, rng
        self.fallbacks = 0

    def search(self, state: State):
        depth = min(self.H_S, self.session.horizon - state.t)
        return tree_search(self.session, self.session.encode(state), depth)

    def act(self, state, rng=None):
        a = self.search(state)
        if a is None:
            self.fallbacks += 1
            return int(self.rng.integers(2))
        return int(a)

    def action_distribution(self, state):
        a = self.search(state)
        if a is None:
            return (0.5, 0.5)
        return (1.0, 0.0) if a == 0 else (0.0, 1.0)

    def act_batch(self, t, X, rng):
        return np.array([self.act(State(t, x)) for x in np.atleast_2d(X)], dtype=np.int8)
