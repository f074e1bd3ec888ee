"""Small MLP engine: ReLU networks, losses, SGD/AdamW and permutation coupling.

Parameters live in one flat buffer; ``weights[l]`` (shape ``fan_in x fan_out``)
and ``biases[l]`` are views into it, so optimisers act on a single array and
the compiled kernels can take the buffer directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .env import CoordPermutation


def _layout(sizes):
    slices, off = [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = (off, off + fan_in * fan_out)
        off = w[1]
        b = (off, off + fan_out)
        off = b[1]
        slices.append((w, (fan_in, fan_out), b))
    return slices, off


class MlpParams:
    def __init__(self, sizes: Sequence[int], flat: np.ndarray | None = None, dtype=np.float64):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"bad layer sizes {sizes}")
        slices, total = _layout(self.sizes)
        if flat is None:
            flat = np.zeros(total, dtype=dtype)
        elif flat.shape != (total,):
            raise ValueError(f"flat buffer has shape {flat.shape}, expected ({total},)")
        self.flat = flat
        self.weights = [flat[w0:w1].reshape(shape) for (w0, w1), shape, _ in slices]
        self.biases = [flat[b0:b1] for _, _, (b0, b1) in slices]

    @property
    def dtype(self):
        return self.flat.dtype

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams(self.sizes, self.flat.copy())

    def zeros_like(self) -> "MlpParams":
        return MlpParams(self.sizes, np.zeros_like(self.flat))

    def astype(self, dtype) -> "MlpParams":
        return MlpParams(self.sizes, self.flat.astype(dtype))

    def snapshot(self) -> dict:
        """Flat array plus shape header, for debugging dumps."""
        return {"sizes": list(self.sizes), "flat": self.flat.tolist()}

    @classmethod
    def from_snapshot(cls, snap: dict) -> "MlpParams":
        return cls(snap["sizes"], np.asarray(snap["flat"], dtype=np.float64))


def mlp_init(sizes: Sequence[int], rng: np.random.Generator, dtype=np.float64) -> MlpParams:
    """He-uniform weights for layers feeding a ReLU, fan-in uniform for the output layer.

    Entries are i.i.d. within each matrix; biases start at zero.
    """
    params = MlpParams(sizes, dtype=dtype)
    L = params.n_layers
    for l, W in enumerate(params.weights):
        fan_in = W.shape[0]
        bound = np.sqrt(6.0 / fan_in) if l < L - 1 else 1.0 / np.sqrt(fan_in)
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return params


@dataclass
class ForwardCache:
    inputs: list
    pre: list
    single: bool


def forward(params: MlpParams, X: np.ndarray):
    """Return ``(output, cache)``. A 1-D input gives a 1-D output."""
    X = np.asarray(X)
    single = X.ndim == 1
    A = np.atleast_2d(X).astype(params.dtype, copy=False)
    if A.shape[1] != params.sizes[0]:
        raise ValueError(f"input width {A.shape[1]} != {params.sizes[0]}")
    inputs, pre = [], []
    L = params.n_layers
    for l in range(L):
        inputs.append(A)
        Z = A @ params.weights[l]
        Z += params.biases[l]
        pre.append(Z)
        A = np.maximum(Z, 0.0) if l < L - 1 else Z
    return (A[0] if single else A), ForwardCache(inputs, pre, single)


def predict(params: MlpParams, X: np.ndarray) -> np.ndarray:
    return forward(params, X)[0]


def backward(params: MlpParams, cache: ForwardCache, dout: np.ndarray) -> MlpParams:
    """Gradients of ``sum(dout * output)`` with respect to every parameter."""
    D = np.atleast_2d(np.asarray(dout, dtype=params.dtype))
    if D.shape != cache.pre[-1].shape:
        raise ValueError(f"output gradient shape {D.shape} != {cache.pre[-1].shape}")
    grads = params.zeros_like()
    L = params.n_layers
    for l in range(L - 1, -1, -1):
        if l < L - 1:
            D = D * (cache.pre[l] > 0)
        np.matmul(cache.inputs[l].T, D, out=grads.weights[l])
        D.sum(axis=0, out=grads.biases[l])
        if l:
            D = D @ params.weights[l].T
    return grads


# ---------------------------------------------------------------------------
# losses (all return the mean over the batch and its gradient w.r.t. the input)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def cross_entropy_loss(logits, labels):
    logits = np.asarray(logits, dtype=np.float64) if np.ndim(logits) == 1 else np.asarray(logits)
    single = logits.ndim == 1
    Z = np.atleast_2d(logits)
    y = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    B = len(Z)
    logp = log_softmax(Z)
    loss = -logp[np.arange(B), y].mean()
    grad = np.exp(logp)
    grad[np.arange(B), y] -= 1.0
    grad /= B
    return float(loss), (grad[0] if single else grad)


def mse_loss(pred, target):
    pred = np.asarray(pred, dtype=np.float64) if np.ndim(pred) == 0 else np.asarray(pred)
    diff = pred - np.asarray(target)
    n = diff.size
    return float(np.mean(diff ** 2)), 2.0 * diff / n


def entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -(np.exp(logp) * logp).sum(axis=-1)


def ppo_objective(logits, actions, advantages, old_probs, clip: float, beta: float):
    """Mean clipped surrogate plus ``beta`` times policy entropy (to be maximised).

    Returns ``(objective, d objective / d logits)``.
    """
    Z = np.atleast_2d(logits)
    B = len(Z)
    idx = np.arange(B)
    logp = log_softmax(Z)
    p = np.exp(logp)
    ratio = p[idx, actions] / old_probs
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    unclipped_term = ratio * advantages
    surrogate = np.minimum(unclipped_term, clipped * advantages)
    ent = -(p * logp).sum(axis=1)
    obj = float(np.mean(surrogate + beta * ent))
    # d surrogate / d ratio is A where the unclipped branch is the active minimum
    active = unclipped_term <= clipped * advantages
    d_ratio = np.where(active, advantages, 0.0)
    onehot = np.zeros_like(p)
    onehot[idx, actions] = 1.0
    g = (d_ratio * ratio)[:, None] * (onehot - p)
    g += beta * (-p * (logp + ent[:, None]))
    g /= B
    return obj, g


# ---------------------------------------------------------------------------
# optimisers


def sgd_step(params: MlpParams, grads: MlpParams, lr: float) -> MlpParams:
    params.flat -= lr * grads.flat
    return params


@dataclass
class AdamWState:
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step: int = 0

    @classmethod
    def for_params(cls, params: MlpParams, lr: float, weight_decay: float = 0.0, **kw) -> "AdamWState":
        return cls(lr, weight_decay, m=np.zeros_like(params.flat), v=np.zeros_like(params.flat), **kw)


def adamw_step(params: MlpParams, grads: MlpParams, state: AdamWState):
    """Decoupled weight decay followed by a bias-corrected Adam step (in place)."""
    if state.m is None:
        state.m = np.zeros_like(params.flat)
        state.v = np.zeros_like(params.flat)
    state.step += 1
    kernels.adamw_update(params.flat, grads.flat, state.m, state.v, state.lr, state.weight_decay,
                         state.beta1, state.beta2, state.eps, state.step)
    return params, state


class BatchSchedule:
    """Seeded epoch shuffles of ``range(n)`` split into ``n_batches`` near-equal parts."""

    def __init__(self, n: int, n_batches: int, rng: np.random.Generator):
        if n < 1:
            raise ValueError("empty dataset")
        self.n = n
        self.n_batches = max(1, min(int(n_batches), n))
        self.rng = rng
        self._queue: list = []

    def next(self) -> np.ndarray:
        if not self._queue:
            self._queue = np.array_split(self.rng.permutation(self.n), self.n_batches)[::-1]
        return self._queue.pop()


# ---------------------------------------------------------------------------
# input encoding and permutations


def encode_states(t, X: np.ndarray, H: int, dtype=np.float64) -> np.ndarray:
    """One-hot of the time step (``H + 1`` slots) concatenated with the real part."""
    X = np.atleast_2d(X)
    B, n = X.shape
    out = np.zeros((B, H + 1 + n), dtype=dtype)
    t = np.broadcast_to(np.asarray(t, dtype=np.intp), (B,))
    if np.any(t < 0) or np.any(t > H):
        raise ValueError("time step outside [0, H]")
    out[np.arange(B), t] = 1.0
    out[:, H + 1:] = X
    return out


def encode_state(state, H: int) -> np.ndarray:
    return encode_states(state.t, state.x[None, :], H)[0]


def lift_permutation(p: CoordPermutation, H: int, copies: int = 1) -> CoordPermutation:
    """Extend a real-part permutation to ``copies`` concatenated state encodings."""
    width = H + 1 + p.n
    image = np.arange(width * copies)
    for k in range(copies):
        off = k * width + H + 1
        image[off:off + p.n] = off + p.image
    return CoordPermutation(image)


def permute_first_layer(params: MlpParams, p: CoordPermutation, offset: int = 0) -> MlpParams:
    """Relabel first-layer input rows so that ``net'(p(x)) == net(x)``.

    ``p`` acts on input coordinates ``[offset, offset + p.n)``.
    """
    fan_in = params.sizes[0]
    if offset + p.n > fan_in:
        raise ValueError(f"permutation of size {p.n} at offset {offset} exceeds input width {fan_in}")
    full = p if (offset == 0 and p.n == fan_in) else p.embed(offset, fan_in)
    out = params.copy()
    out.weights[0][full.image] = params.weights[0]
    return out


# ---------------------------------------------------------------------------
# per-sample SGD (compiled kernel when available)


def sgd_sequential(params: MlpParams, X: np.ndarray, out_idx: np.ndarray, targets: np.ndarray,
                   lr: float) -> MlpParams:
    """One pass of per-sample SGD on ``(net(x)[k] - y)^2``, samples in order (in place)."""
    if params.dtype != np.float64:
        raise TypeError("sequential kernel runs in float64")
    X = np.ascontiguousarray(X, dtype=np.float64)
    kernels.sgd_sequential(params.flat, np.asarray(params.sizes, dtype=np.int64), X,
                           np.ascontiguousarray(out_idx, dtype=np.int64),
                           np.ascontiguousarray(targets, dtype=np.float64), float(lr))
    return params


# ---------------------------------------------------------------------------
# checks


def gradient_check(params: MlpParams, X: np.ndarray,
                   loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
                   h: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between backprop and central differences over all parameters.

    The denominator is ``max(|analytic|, |numeric|, floor)``.
    """
    out, cache = forward(params, X)
    _, dout = loss_fn(out)
    analytic = backward(params, cache, dout).flat
    numeric = np.empty_like(analytic)
    theta = params.flat
    for i in range(len(theta)):
        old = theta[i]
        theta[i] = old + h
        lp = loss_fn(predict(params, X))[0]
        theta[i] = old - h
        lm = loss_fn(predict(params, X))[0]
        theta[i] = old
        numeric[i] = (lp - lm) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@dataclass
class TrainingProcedure:
    """First-layer-then-smooth network trained by SGD or AdamW on mini-batches."""

    optimizer: str = "adamw"
    loss: str = "ce"
    hidden: tuple = (32, 32)
    n_out: int = 2
    lr: float = 1e-2
    weight_decay: float = 0.0
    steps: int = 200
    n_batches: int = 10
    first_layer_lr_scale: np.ndarray | None = None  # per input coordinate; breaks coupling

    def sizes(self, n_in: int) -> tuple:
        return (n_in, *self.hidden, self.n_out)

    def loss_fn(self, out, y):
        if self.loss == "ce":
            return cross_entropy_loss(out, y)
        return mse_loss(out[:, 0], y)

    def run(self, params: MlpParams, X: np.ndarray, y: np.ndarray, seed: int,
            callback: Callable[[int, MlpParams], None] | None = None) -> MlpParams:
        if self.optimizer not in ("sgd", "adamw"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        sched = BatchSchedule(len(X), self.n_batches, np.random.default_rng(seed))
        state = AdamWState.for_params(params, self.lr, self.weight_decay)
        for k in range(self.steps):
            idx = sched.next()
            out, cache = forward(params, X[idx])
            _, dout = self.loss_fn(out, y[idx])
            if self.loss != "ce":
                dout = dout[:, None]
            grads = backward(params, cache, dout)
            if self.first_layer_lr_scale is not None:
                grads.weights[0] *= np.asarray(self.first_layer_lr_scale)[:, None]
            if self.optimizer == "sgd":
                sgd_step(params, grads, self.lr)
            else:
                adamw_step(params, grads, state)
            if callback is not None:
                callback(k, params)
        return params


@dataclass
class CouplingReport:
    max_deviation: float
    tolerance: float
    per_step: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)


def coupled_training_check(X: np.ndarray, y: np.ndarray, p: CoordPermutation,
                           procedure: TrainingProcedure, probes: np.ndarray,
                           tolerance: float = 1e-9, seed: int = 0) -> CouplingReport:
    """Train on ``d`` and on ``d_p`` from coupled inits; compare ``nn_A(x)`` with ``nn_B(p(x))``.

    Net B starts from ``permute_first_layer(theta_A, p)`` and sees the same
    batch order. The deviation is measured on every probe after every step.
    """
    X = np.asarray(X, dtype=np.float64)
    if p.n != X.shape[1]:
        raise ValueError("permutation must act on the full input width")
    rng = np.random.default_rng(seed)
    A = mlp_init(procedure.sizes(X.shape[1]), rng)
    B = permute_first_layer(A, p)
    Xp, probes_p = p(X), p(np.asarray(probes, dtype=np.float64))
    trace_a = []
    procedure.run(A, X, y, seed + 1, lambda k, prm: trace_a.append(predict(prm, probes)))
    report = CouplingReport(0.0, tolerance)

    def compare(k, prm):
        dev = float(np.max(np.abs(trace_a[k] - predict(prm, probes_p))))
        report.per_step.append(dev)
        report.max_deviation = max(report.max_deviation, dev)

    procedure.run(B, Xp, y, seed + 1, compare)
    return report
