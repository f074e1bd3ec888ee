"""The combination-lock MDP family and the deterministic bandit it reduces to.

Coordinate layout of the real part, for ``m = H - 2``::

    [a_1 .. a_m, bu_1, bd_1, bu_2, bd_2, .., bu_m, bd_m, c]

``c`` marks the controllable (right) branch. On the right branch the action
taken at step ``t`` is written into ``a_t``; the last transition replaces the
``a`` block by per-position match flags against the hidden word ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .env import CoordPermutation
from .mdp import Mdp, State, TerminalStepError, check_action

ENUMERATION_MAX_H = 22


@dataclass(frozen=True)
class LockSpec:
    H: int
    b: tuple[int, ...]

    def __post_init__(self):
        if self.H < 3:
            raise ValueError(f"horizon must be >= 3, got {self.H}")
        b = tuple(int(v) for v in self.b)
        if len(b) != self.H - 2:
            raise ValueError(f"word length {len(b)} != H - 2 = {self.H - 2}")
        if any(v not in (0, 1) for v in b):
            raise ValueError("word must be binary")
        object.__setattr__(self, "b", b)

    @classmethod
    def from_bits(cls, H: int, bits: str) -> "LockSpec":
        return cls(H, tuple(int(c) for c in bits))

    @classmethod
    def random(cls, H: int, rng: np.random.Generator) -> "LockSpec":
        return cls(H, tuple(int(v) for v in rng.integers(0, 2, size=H - 2)))

    @property
    def m(self) -> int:
        return self.H - 2

    @property
    def n(self) -> int:
        return 3 * (self.H - 2) + 1

    @property
    def bits(self) -> str:
        return "".join(str(v) for v in self.b)

    @property
    def layout(self) -> "StateLayout":
        return StateLayout(self.H)


class StateLayout:
    """Index maps for the ``a``, ``bu``, ``bd`` and ``c`` coordinates (1-based positions)."""

    def __init__(self, H: int):
        self.m = m = H - 2
        self.n = 3 * m + 1
        self.a = np.arange(m)
        self.bu = m + 2 * np.arange(m)
        self.bd = self.bu + 1
        self.c = 3 * m

    def a_idx(self, i: int) -> int:
        return int(self.a[i - 1])

    def bu_idx(self, i: int) -> int:
        return int(self.bu[i - 1])

    def bd_idx(self, i: int) -> int:
        return int(self.bd[i - 1])

    @property
    def c_idx(self) -> int:
        return self.c

    @property
    def b_block(self) -> np.ndarray:
        return np.sort(np.concatenate([self.bu, self.bd]))


class LockMdp(Mdp):
    """One member of the lock family.

    ``final_permutation`` (an index array ``f`` with ``y[f] = x``) is applied
    to right-branch final states. It must fix the goal state; it is used to
    build permutation twins whose non-rewarding right terminals are relabelled.
    """

    def __init__(self, spec: LockSpec, final_permutation=None):
        self.spec = spec
        self.horizon = spec.H
        self.state_dim = spec.n
        self.layout = spec.layout
        self._b = np.asarray(spec.b, dtype=np.int8)
        self._goal = goal_state(spec).x
        self._final_perm = None
        if final_permutation is not None:
            f = np.asarray(final_permutation, dtype=np.intp)
            if sorted(f.tolist()) != list(range(spec.n)):
                raise ValueError("final_permutation is not a bijection")
            moved = np.empty(spec.n)
            moved[f] = self._goal
            if not np.array_equal(moved, self._goal):
                raise ValueError("final_permutation must fix the goal state")
            self._final_perm = f

    def __repr__(self):
        return f"LockMdp(H={self.spec.H}, b={self.spec.bits})"

    def init(self, rng):
        return State(0, np.zeros(self.state_dim))

    def init_batch(self, n, rng):
        return np.zeros((n, self.state_dim))

    def step(self, state, action, rng):
        check_action(action)
        r, X = self.step_batch(state.t, state.x[None, :], np.array([action], dtype=np.int8), rng)
        return float(r[0]), State(state.t + 1, X[0])

    def step_batch(self, t, X, actions, rng):
        H, lay = self.horizon, self.layout
        if t >= H:
            raise TerminalStepError(f"step called on terminal time step t={t}")
        if t < 0:
            raise ValueError(f"negative time step {t}")
        n = len(X)
        Xn = np.array(X, dtype=np.float64, copy=True)
        r = np.zeros(n)
        if t == 0:
            Xn[:] = 0.0
            Xn[:, lay.c] = (rng.random(n) < 0.5).astype(np.float64)
            return r, Xn
        right = Xn[:, lay.c] == 1.0
        if t < H - 1:
            # right branch records a_t; left branch stays all-zero
            Xn[right, lay.a[t - 1]] = np.asarray(actions, dtype=np.float64)[right]
            return r, Xn
        # final transition t = H-1 -> H
        lucky = rng.random(n) < 1.0 / 3.0
        A = Xn[:, lay.a]
        match = (A == self._b[None, :]).astype(np.float64)
        Xn[:] = 0.0
        Xn[:, lay.bu] = match
        Xn[:, lay.bd] = 1.0 - match
        won = right & (match.sum(axis=1) == lay.m)
        if self._final_perm is not None and right.any():
            moved = np.empty((int(right.sum()), self.state_dim))
            moved[:, self._final_perm] = Xn[right]
            Xn[right] = moved
        left = ~right
        Xn[left] = 0.0
        left_win = left & lucky
        Xn[left_win] = self._goal
        r[won | left_win] = 1.0
        return r, Xn


def make_lock_mdp(spec: LockSpec, final_permutation=None) -> LockMdp:
    return LockMdp(spec, final_permutation)


def goal_state(spec: LockSpec | int) -> State:
    H = spec.H if isinstance(spec, LockSpec) else int(spec)
    lay = StateLayout(H)
    x = np.zeros(lay.n)
    x[lay.bu] = 1.0
    return State(H, x)


def right_final_state(spec: LockSpec, word) -> tuple[State, float]:
    """Deterministic right-branch outcome of playing ``word`` at steps 1..H-2."""
    lay = spec.layout
    match = (np.asarray(word) == np.asarray(spec.b)).astype(np.float64)
    x = np.zeros(spec.n)
    x[lay.bu] = match
    x[lay.bd] = 1.0 - match
    return State(spec.H, x), float(match.all())


def enumerate_right_outcomes(spec: LockSpec, mdp: LockMdp | None = None):
    """All ``2^(H-2)`` right-branch outcomes, produced by stepping the MDP itself.

    Returns a list of ``(word, final_state, reward)``.
    """
    if spec.H > ENUMERATION_MAX_H:
        raise ValueError(f"H={spec.H} exceeds enumeration guard {ENUMERATION_MAX_H}")
    mdp = mdp if mdp is not None else LockMdp(spec)
    m, lay = spec.m, spec.layout
    codes = np.arange(2 ** m, dtype=np.int64)[:, None]
    words = ((codes >> np.arange(m - 1, -1, -1)) & 1).astype(np.int8)
    X = np.zeros((len(words), spec.n))
    X[:, lay.c] = 1.0
    rng = np.random.default_rng(0)  # only the final left-branch coin draws from it
    R = np.zeros(len(words))
    for t in range(1, spec.H):
        a = words[:, t - 1] if t <= m else np.zeros(len(words), dtype=np.int8)
        R, X = mdp.step_batch(t, X, a, rng)
    return [(tuple(int(v) for v in w), State(spec.H, x), float(r))
            for w, x, r in zip(words, X, R)]


def uniform_success_terms(spec: LockSpec | int) -> tuple[Fraction, Fraction]:
    """Exact ``(left, right)`` contributions to P(reward) under the uniform policy."""
    H = spec.H if isinstance(spec, LockSpec) else int(spec)
    if H < 3:
        raise ValueError("horizon must be >= 3")
    return Fraction(1, 2) * Fraction(1, 3), Fraction(1, 2) * Fraction(1, 2 ** (H - 2))


def uniform_success_probability(spec: LockSpec | int) -> Fraction:
    left, right = uniform_success_terms(spec)
    return left + right


# ---------------------------------------------------------------------------
# deterministic armed bandit


@dataclass(frozen=True)
class BanditSpec:
    A: int
    i_star: int

    def __post_init__(self):
        if self.A < 1:
            raise ValueError("need at least one arm")
        if not 1 <= self.i_star <= self.A:
            raise ValueError(f"i_star={self.i_star} outside [1, {self.A}]")


class Bandit:
    """Deterministic bandit: arm ``i_star`` pays 1, every other arm pays 0."""

    def __init__(self, spec: BanditSpec):
        self.spec = spec
        self.pulls = 0

    def pull(self, i: int) -> float:
        if not 1 <= i <= self.spec.A:
            raise IndexError(f"arm {i} outside [1, {self.spec.A}]")
        self.pulls += 1
        return 1.0 if i == self.spec.i_star else 0.0

    __call__ = pull


def make_bandit(spec: BanditSpec) -> Bandit:
    return Bandit(spec)


def bandit_guess_experiment(A: int, K: int, trials: int, rng: np.random.Generator) -> float:
    """Failure rate of "probe K distinct random arms, else guess among the rest".

    The rewarding arm is drawn uniformly per trial and every probe goes
    through ``Bandit.pull``.
    """
    if not 0 <= K < A:
        raise ValueError(f"need 0 <= K < A, got K={K}, A={A}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stars = rng.integers(1, A + 1, size=trials)
    orders = rng.permuted(np.tile(np.arange(1, A + 1), (trials, 1)), axis=1)
    fallback = orders[np.arange(trials), rng.integers(K, A, size=trials)]
    probes = orders[:, :K].tolist()
    failures = 0
    for star, probe, guess in zip(stars.tolist(), probes, fallback.tolist()):
        bandit = Bandit(BanditSpec(A, star))
        answer = guess
        for arm in probe:
            if bandit.pull(arm) == 1.0:
                answer = arm
                break
        failures += answer != star
    return failures / trials


def bandit_failure_closed_form(A: int, K: int) -> Fraction:
    return 1 - Fraction(K + 1, A)


def bandit_failure_exhaustive(A: int, K: int) -> Fraction:
    """Exact failure probability by enumerating arm, probe set and guess."""
    if not 0 <= K < A:
        raise ValueError(f"need 0 <= K < A, got K={K}, A={A}")
    arms = range(1, A + 1)
    subsets = list(combinations(arms, K))
    fail = Fraction(0)
    for star in arms:
        for probe in subsets:
            if star in probe:
                continue
            rest = [a for a in arms if a not in probe]
            misses = sum(g != star for g in rest)
            fail += Fraction(misses, len(rest))
    return fail / (A * len(subsets))


def twin_permutation(spec: LockSpec, i: int, j: int):
    """Swap ``bu_i <-> bu_j`` and ``bd_i <-> bd_j`` (1-based).

    The result fixes the goal and every non-final state, and relabels the
    zero-reward right-branch finals whose flags differ at ``i`` and ``j``.
    """
    if not (1 <= i <= spec.m and 1 <= j <= spec.m) or i == j:
        raise ValueError(f"need distinct positions in 1..{spec.m}")
    lay = spec.layout
    return CoordPermutation.from_cycles(spec.n, [lay.bu_idx(i), lay.bu_idx(j)], [lay.bd_idx(i), lay.bd_idx(j)])


def permutation_twin(spec: LockSpec, p) -> LockMdp:
    """The lock MDP whose right-branch finals are ``p`` applied to the originals."""
    return LockMdp(spec, final_permutation=p.image)
