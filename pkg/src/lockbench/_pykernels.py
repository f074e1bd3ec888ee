"""Pure-numpy reference implementations of the compiled kernels."""
from __future__ import annotations

import numpy as np


def erm_error_counts(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Errors of ``x_j > 0`` (column 0) and ``-x_j > 0`` (column 1) against labels ``y``."""
    y = np.asarray(y).astype(bool)[:, None]
    plus = ((X > 0) != y).sum(axis=0)
    minus = ((X < 0) != y).sum(axis=0)
    return np.stack([plus, minus], axis=1).astype(np.int64)


def sgd_sequential(flat, sizes, X, out_idx, targets, lr):
    """Per-sample SGD on ``(net(x)[k] - y)^2`` over the rows of ``X``, in order.

    ``flat`` holds, per layer, the row-major ``fan_in x fan_out`` weight matrix
    followed by the bias vector; it is updated in place.
    """
    sizes = [int(s) for s in sizes]
    Ws, bs, off = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        Ws.append(flat[off:off + fan_in * fan_out].reshape(fan_in, fan_out))
        off += fan_in * fan_out
        bs.append(flat[off:off + fan_out])
        off += fan_out
    L = len(Ws)
    for x, k, y in zip(X, out_idx, targets):
        acts, pres = [x], []
        a = x
        for l in range(L):
            z = a @ Ws[l] + bs[l]
            pres.append(z)
            a = np.maximum(z, 0.0) if l < L - 1 else z
            acts.append(a)
        delta = np.zeros(sizes[-1])
        delta[k] = 2.0 * (a[k] - y)
        for l in range(L - 1, -1, -1):
            if l < L - 1:
                delta = delta * (pres[l] > 0)
            prev = Ws[l] @ delta if l else None
            Ws[l] -= lr * np.outer(acts[l], delta)
            bs[l] -= lr * delta
            delta = prev


def adamw_update(theta, grad, m, v, lr, weight_decay, beta1, beta2, eps, step):
    """One in-place AdamW update with decoupled decay and bias correction."""
    if weight_decay:
        theta *= 1.0 - lr * weight_decay
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    mhat = m / (1.0 - beta1 ** step)
    vhat = v / (1.0 - beta2 ** step)
    theta -= lr * mhat / (np.sqrt(vhat) + eps)
