"""State-obfuscating environment interface.

An :class:`EnvSession` wraps an MDP and hands out integer handles instead of
next states. Next states are only observable through the evaluation
functions ``F`` passed to each call; every step appends ``(s, g(a, r, f_s'))``
to an append-only dataset that those functions receive as their second
argument.

Evaluation functions are plain callables ``f(state, records) -> float``. A
function whose value depends on random initialisation may expose
``permuted(p)`` returning its coupled twin (same randomness, relabelled
coordinates); :func:`symmetry_probe` uses it when present.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from .mdp import Mdp, State, check_action

Handle = int
EvalFunction = Callable[[State, Sequence["DataRecord"]], float]
PayloadFn = Callable[[int, float, np.ndarray], Any]


class _Terminal:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TERMINAL"

    def __bool__(self):
        return False


TERMINAL = _Terminal()


class DataRecord(NamedTuple):
    s: State
    payload: Any


class StepResult(NamedTuple):
    s: State
    a: int
    r: float
    handle: Handle
    evals: np.ndarray


class DataView(Sequence):
    """Read-only prefix view of the session dataset, frozen at creation."""

    __slots__ = ("_records", "_n", "_epoch")

    def __init__(self, records: list, n: int, epoch: int = 0):
        self._records = records
        self._n = n
        self._epoch = epoch

    def __len__(self):
        return self._n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._records[j] for j in range(*i.indices(self._n))]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return self._records[i]

    def __iter__(self):
        for i in range(self._n):
            yield self._records[i]

    @property
    def epoch(self) -> int:
        """Incremented on every ``reset_data``; lets callers key caches on content."""
        return self._epoch

    @classmethod
    def of(cls, records: Sequence[DataRecord]) -> "DataView":
        records = list(records)
        return cls(records, len(records))


class EnvSession:
    """Single-owner wrapper of an MDP behind the handle interface."""

    def __init__(self, mdp: Mdp, rng: np.random.Generator):
        self.mdp = mdp
        self.rng = rng
        self._store: list[State] = []
        self._data: list[DataRecord] = []
        self._epoch = 0
        self.calls = {"init": 0, "step": 0, "evaluate_state": 0, "encode": 0}

    # -- bookkeeping -------------------------------------------------------
    @property
    def call_count(self) -> int:
        """init + step + evaluate_state calls; encodes are tracked separately."""
        c = self.calls
        return c["init"] + c["step"] + c["evaluate_state"]

    @property
    def encode_count(self) -> int:
        return self.calls["encode"]

    @property
    def horizon(self) -> int:
        return self.mdp.horizon

    @property
    def state_dim(self) -> int:
        return self.mdp.state_dim

    @property
    def data(self) -> DataView:
        return DataView(self._data, len(self._data), self._epoch)

    def __len__(self):
        return len(self._data)

    def _encode(self, s: State) -> Handle:
        self._store.append(s)
        return len(self._store) - 1

    def _decode(self, h: Handle) -> State:
        if not isinstance(h, (int, np.integer)) or not 0 <= h < len(self._store):
            raise KeyError(f"invalid handle {h!r}")
        return self._store[h]

    def _evaluate(self, s: State, F: Sequence[EvalFunction]) -> np.ndarray:
        view = self.data
        return np.array([f(s, view) for f in F], dtype=np.float64)

    # -- interface ---------------------------------------------------------
    def init(self, F: Sequence[EvalFunction] = ()):
        self.calls["init"] += 1
        s = self.mdp.init(self.rng)
        h = self._encode(s)
        return s, h, self._evaluate(s, F)

    def step(self, h: Handle, a: int, g: PayloadFn | None, F: Sequence[EvalFunction] = ()):
        self.calls["step"] += 1
        s = self._decode(h)
        a = check_action(a)
        if self.mdp.is_terminal(s):
            return TERMINAL
        r, s_next = self.mdp.step(s, a, self.rng)
        h_next = self._encode(s_next)
        f_next = self._evaluate(s_next, F)
        payload = g(a, r, f_next) if g is not None else None
        self._data.append(DataRecord(s, payload))
        return StepResult(s, a, float(r), h_next, f_next)

    def evaluate_state(self, s: State, F: Sequence[EvalFunction]) -> np.ndarray:
        self.calls["evaluate_state"] += 1
        return self._evaluate(s, F)

    def encode(self, s: State) -> Handle:
        self.calls["encode"] += 1
        return self._encode(s)

    def reset_data(self) -> None:
        self._data = []
        self._epoch += 1


class InterfaceView:
    """Exposes only the interface calls of a session (plus its public metadata).

    Solvers that take one of these cannot reach the wrapped MDP or the
    handle store.
    """

    __slots__ = ("_session",)
    _allowed = frozenset({"init", "step", "evaluate_state", "encode", "reset_data", "data",
                          "call_count", "encode_count", "calls", "horizon", "state_dim"})

    def __init__(self, session: EnvSession):
        object.__setattr__(self, "_session", session)

    def __getattr__(self, name):
        if name not in InterfaceView._allowed:
            raise AttributeError(f"{name!r} is not part of the interface")
        return getattr(object.__getattribute__(self, "_session"), name)

    def __setattr__(self, name, value):
        raise AttributeError("interface view is read-only")


# ---------------------------------------------------------------------------
# coordinate permutations


class CoordPermutation:
    """Bijection of coordinates: ``p(x)[image[i]] = x[i]``."""

    __slots__ = ("image",)

    def __init__(self, image):
        image = np.asarray(image, dtype=np.intp)
        if image.ndim != 1 or not np.array_equal(np.sort(image), np.arange(len(image))):
            raise ValueError("image must be a permutation of 0..n-1")
        image.setflags(write=False)
        self.image = image

    @classmethod
    def identity(cls, n: int) -> "CoordPermutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "CoordPermutation":
        return cls(rng.permutation(n))

    @classmethod
    def from_cycles(cls, n: int, *cycles) -> "CoordPermutation":
        image = np.arange(n)
        for cyc in cycles:
            for i, j in zip(cyc, cyc[1:] + cyc[:1]):
                image[i] = j
        return cls(image)

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, x):
        if isinstance(x, State):
            return State(x.t, self(x.x))
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ValueError(f"dimension mismatch: permutation on {self.n}, vector of {x.shape[-1]}")
        out = np.empty_like(x)
        out[..., self.image] = x
        return out

    def inverse(self) -> "CoordPermutation":
        return CoordPermutation(np.argsort(self.image))

    def __matmul__(self, other: "CoordPermutation") -> "CoordPermutation":
        """Composition: ``(p @ q)(x) == p(q(x))``."""
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return CoordPermutation(self.image[other.image])

    def __eq__(self, other):
        return isinstance(other, CoordPermutation) and np.array_equal(self.image, other.image)

    def __hash__(self):
        return hash(self.image.tobytes())

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.image, np.arange(self.n)))

    def embed(self, offset: int, total: int) -> "CoordPermutation":
        """Act on ``[offset, offset + n)`` of a ``total``-long vector, fixing the rest."""
        image = np.arange(total)
        image[offset:offset + self.n] = offset + self.image
        return CoordPermutation(image)

    def __repr__(self):
        return f"CoordPermutation({self.image.tolist()})"


def apply_permutation(p: CoordPermutation, s: State) -> State:
    return p(s)


def permute_records(p: CoordPermutation, records: Sequence[DataRecord]) -> DataView:
    return DataView.of([DataRecord(p(r.s), r.payload) for r in records])


def fixing_permutation(z: State, w: State, dataset_states: Sequence[State]) -> CoordPermutation:
    """A permutation ``p`` with ``p(z) = w`` that fixes every dataset state.

    Coordinates that are zero in every dataset state are free to move; the
    others must already agree between ``z`` and ``w``. Raises ``ValueError``
    if no such permutation exists.
    """
    n = len(z.x)
    if dataset_states:
        used = np.any(np.stack([s.x for s in dataset_states]) != 0, axis=0)
    else:
        used = np.zeros(n, dtype=bool)
    if not np.array_equal(z.x[used], w.x[used]):
        raise ValueError("states differ on coordinates used by the dataset")
    free = np.flatnonzero(~used)
    image = np.arange(n)
    zf, wf = z.x[free], w.x[free]
    for v in np.unique(np.concatenate([zf, wf])):
        src, dst = free[zf == v], free[wf == v]
        if len(src) != len(dst):
            raise ValueError("value multisets on free coordinates differ")
        image[src] = dst
    return CoordPermutation(image)


@dataclass
class SymmetryReport:
    max_deviation: float
    deviations: np.ndarray  # (n_functions, n_probes)
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)


def symmetry_probe(F: Sequence[EvalFunction], records: Sequence[DataRecord], p: CoordPermutation,
                   probes: Sequence[State], tolerance: float = 1e-9) -> SymmetryReport:
    """Check ``f(s, D) == f(p(s), p(D))`` for every function and probe state."""
    view = records if isinstance(records, DataView) else DataView.of(records)
    permuted_view = permute_records(p, view)
    dev = np.zeros((len(F), len(probes)))
    for i, f in enumerate(F):
        twin = f.permuted(p) if hasattr(f, "permuted") else f
        for j, s in enumerate(probes):
            a = f(s, view)
            b = twin(p(s), permuted_view)
            dev[i, j] = abs(a - b) if np.isfinite(a) and np.isfinite(b) else np.inf
    return SymmetryReport(float(dev.max()) if dev.size else 0.0, dev, tolerance)
