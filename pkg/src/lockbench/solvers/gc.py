"""Goal-conditioned learner with exact single-feature threshold ERM.

Samples uniform-policy trajectories, takes the best-rewarded final state as
the goal, and fits one predictor per time step mapping ``[x_t; x_H]`` to the
action taken at ``t``. The hypothesis class is ``delta(sign * z_j > 0)`` over
features ``j`` of the concatenated input (at most one non-zero weight, no
bias), searched exhaustively.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..mdp import DeterministicPolicy, Mdp, Rollout, State, UniformPolicy, rollout


@dataclass(frozen=True)
class LinearThreshold:
    feature: int
    sign: int
    errors: int
    n: int

    @property
    def error_rate(self) -> float:
        return self.errors / self.n

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return (self.sign * np.atleast_2d(Z)[:, self.feature] > 0).astype(np.int8)


@dataclass
class GcSlice:
    t: int
    inputs: np.ndarray  # (m, 2n)
    labels: np.ndarray  # (m,)


def erm_l0(inputs: np.ndarray, labels: np.ndarray, alpha: int = 1) -> LinearThreshold:
    """Global empirical-error minimiser over all ``feature x sign`` hypotheses.

    Ties break on (errors, feature index, +1 before -1).
    """
    if alpha != 1:
        raise NotImplementedError("only alpha = 1 is supported")
    Z = np.ascontiguousarray(inputs, dtype=np.float64)
    if Z.ndim != 2 or len(Z) == 0:
        raise ValueError("empty slice")
    counts = kernels.erm_error_counts(Z, np.asarray(labels, dtype=np.int64))
    k = int(np.argmin(counts.ravel()))  # first minimum in (feature, sign) order
    return LinearThreshold(k // 2, 1 if k % 2 == 0 else -1, int(counts.ravel()[k]), len(Z))


def gc_slices(ro: Rollout) -> list[GcSlice]:
    H = ro.horizon
    final = ro.states[:, H]
    return [GcSlice(t, np.concatenate([ro.states[:, t], final], axis=1), ro.actions[:, t].copy())
            for t in range(H)]


def select_goal(ro: Rollout) -> np.ndarray:
    """Final state of the first trajectory with the largest final-transition reward."""
    i = int(np.argmax(ro.rewards[:, -1]))
    return ro.states[i, -1].copy()


class GcPolicy(DeterministicPolicy):
    """Acts with ``f^t([x_t; goal])``."""

    def __init__(self, goal: State, predictors: list[LinearThreshold]):
        self.goal = goal
        self.predictors = predictors

    def choose(self, t, X):
        X = np.atleast_2d(X)
        Z = np.concatenate([X, np.broadcast_to(self.goal.x, X.shape)], axis=1)
        return self.predictors[t].predict(Z)


def gc_exact(mdp: Mdp, N: int, alpha: int, rng: np.random.Generator,
             return_rollout: bool = False):
    if N < 1:
        raise ValueError("N must be >= 1")
    ro = rollout(mdp, UniformPolicy(), N, rng)
    goal = State(mdp.horizon, select_goal(ro))
    predictors = [erm_l0(sl.inputs, sl.labels, alpha) for sl in gc_slices(ro)]
    policy = GcPolicy(goal, predictors)
    return (policy, ro) if return_rollout else policy
