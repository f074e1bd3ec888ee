"""Finite-horizon MDP primitives shared by every other module.

States are ``(t, x)`` pairs with an integer time step and a real vector.
Actions are the plain integers 0 and 1. Every sampler takes an explicit
``numpy.random.Generator``; nothing here touches global random state.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

ACTIONS = (0, 1)


class TerminalStepError(RuntimeError):
    """Raised when ``step`` is called on a state with ``t == H``."""


@dataclass(frozen=True, eq=False)
class State:
    t: int
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("state vector must be one-dimensional")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", int(self.t))

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.x, other.x)

    def __hash__(self):
        return hash((self.t, self.x.tobytes()))

    def __repr__(self):
        body = ",".join(f"{v:g}" for v in self.x)
        return f"State(t={self.t}, x=[{body}])"


class Transition(NamedTuple):
    s: State
    a: int
    r: float
    s_next: State


@dataclass(frozen=True)
class Trajectory:
    states: tuple[State, ...]
    actions: tuple[int, ...]
    rewards: tuple[float, ...]

    @property
    def horizon(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def final_state(self) -> State:
        return self.states[-1]

    def transitions(self) -> list[Transition]:
        return [
            Transition(self.states[i], self.actions[i], self.rewards[i], self.states[i + 1])
            for i in range(self.horizon)
        ]


def check_action(a) -> int:
    if isinstance(a, (bool, np.bool_)) or a not in ACTIONS:
        raise ValueError(f"action must be 0 or 1, got {a!r}")
    return int(a)


class Mdp(abc.ABC):
    """Finite-horizon MDP with binary actions.

    Subclasses implement ``init`` and ``step`` on single states. The batched
    ``init_batch``/``step_batch`` fall back to looping and are overridden
    where a vectorised form exists.
    """

    horizon: int
    state_dim: int

    @abc.abstractmethod
    def init(self, rng: np.random.Generator) -> State:
        ...

    @abc.abstractmethod
    def step(self, state: State, action: int, rng: np.random.Generator) -> tuple[float, State]:
        ...

    def is_terminal(self, state: State) -> bool:
        return state.t >= self.horizon

    def init_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.stack([self.init(rng).x for _ in range(n)])

    def step_batch(self, t: int, X: np.ndarray, actions: np.ndarray, rng: np.random.Generator):
        rewards = np.empty(len(X))
        X_next = np.empty_like(X, dtype=np.float64)
        for i, (x, a) in enumerate(zip(X, actions)):
            rewards[i], s = self.step(State(t, x), int(a), rng)
            X_next[i] = s.x
        return rewards, X_next


class Policy(abc.ABC):
    """Maps a state to a distribution over the two actions."""

    @abc.abstractmethod
    def action_distribution(self, state: State) -> tuple[float, float]:
        ...

    def act(self, state: State, rng: np.random.Generator) -> int:
        p0, _ = self.action_distribution(state)
        return int(rng.random() >= p0)

    def probs_batch(self, t: int, X: np.ndarray) -> np.ndarray:
        """Action probabilities for a batch of states sharing time step ``t``."""
        return np.array([self.action_distribution(State(t, x)) for x in X])

    def act_batch(self, t: int, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        p = self.probs_batch(t, X)
        return (rng.random(len(X)) >= p[:, 0]).astype(np.int8)


class DeterministicPolicy(Policy):
    """Policy given by ``choose(t, X) -> actions``; distributions are one-hot."""

    @abc.abstractmethod
    def choose(self, t: int, X: np.ndarray) -> np.ndarray:
        ...

    def action_distribution(self, state):
        a = int(self.choose(state.t, state.x[None, :])[0])
        return (1.0, 0.0) if a == 0 else (0.0, 1.0)

    def act(self, state, rng):
        return int(self.choose(state.t, state.x[None, :])[0])

    def probs_batch(self, t, X):
        a = self.choose(t, X)
        return np.stack([1.0 - a, a.astype(np.float64)], axis=1)

    def act_batch(self, t, X, rng):
        return np.asarray(self.choose(t, X), dtype=np.int8)


class UniformPolicy(Policy):
    def action_distribution(self, state):
        return (0.5, 0.5)

    def act_batch(self, t, X, rng):
        return rng.integers(0, 2, size=len(X), dtype=np.int8)


class FixedWordPolicy(DeterministicPolicy):
    """Plays ``word[t]`` at time ``t`` regardless of the state."""

    def __init__(self, word: Sequence[int]):
        self.word = np.asarray(word, dtype=np.int8)

    def choose(self, t, X):
        return np.full(len(X), self.word[t], dtype=np.int8)


def uniform_policy() -> UniformPolicy:
    return UniformPolicy()


def sample_trajectory(mdp: Mdp, policy: Policy, rng: np.random.Generator) -> Trajectory:
    s = mdp.init(rng)
    states, actions, rewards = [s], [], []
    for _ in range(mdp.horizon):
        a = check_action(policy.act(s, rng))
        r, s = mdp.step(s, a, rng)
        states.append(s)
        actions.append(a)
        rewards.append(float(r))
    return Trajectory(tuple(states), tuple(actions), tuple(rewards))


@dataclass
class Rollout:
    """A batch of ``n`` trajectories stored as arrays.

    ``states[i, t]`` is the real part of ``s_t`` of trajectory ``i``; the time
    step is the second index.
    """

    states: np.ndarray   # (n, H+1, d)
    actions: np.ndarray  # (n, H) int8
    rewards: np.ndarray  # (n, H)

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def horizon(self) -> int:
        return self.actions.shape[1]

    def returns(self) -> np.ndarray:
        return self.rewards.sum(axis=1)

    def trajectory(self, i: int) -> Trajectory:
        H = self.horizon
        states = tuple(State(t, self.states[i, t]) for t in range(H + 1))
        return Trajectory(states, tuple(int(a) for a in self.actions[i]),
                          tuple(float(r) for r in self.rewards[i]))


def rollout(mdp: Mdp, policy: Policy, n: int, rng: np.random.Generator,
            dtype=np.float64) -> Rollout:
    """Sample ``n`` trajectories in lockstep, one time step at a time."""
    H = mdp.horizon
    X = mdp.init_batch(n, rng)
    states = np.empty((n, H + 1, mdp.state_dim), dtype=dtype)
    actions = np.empty((n, H), dtype=np.int8)
    rewards = np.empty((n, H))
    states[:, 0] = X
    for t in range(H):
        a = policy.act_batch(t, X, rng)
        rewards[:, t], X = mdp.step_batch(t, X, a, rng)
        actions[:, t] = a
        states[:, t + 1] = X
    return Rollout(states, actions, rewards)


def estimate_return(mdp: Mdp, policy: Policy, n_samples: int, rng: np.random.Generator,
                    chunk: int = 20_000) -> float:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    total = 0.0
    left = n_samples
    while left:
        m = min(chunk, left)
        total += float(rollout(mdp, policy, m, rng).returns().sum())
        left -= m
    return total / n_samples
