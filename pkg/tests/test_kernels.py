import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from lockbench import kernels
from lockbench.nn import mlp_init


def test_backend_selected():
    assert kernels.BACKEND in kernels.backends()


def test_erm_counts_semantics(backend):
    Z = np.array([[1.0, -1.0, 0.0], [0.0, 2.0, 0.0]])
    y = np.array([1, 0])
    # x_0 > 0 predicts (1, 0): no errors; -x_0 > 0 predicts (0, 0): one error
    assert backend.erm_error_counts(Z, y).tolist() == [[0, 1], [2, 0], [1, 1]]


def test_backends_agree_on_erm(rng):
    found = kernels.backends()
    if len(found) < 2:
        pytest.skip("compiled backend not built")
    for _ in range(20):
        Z = rng.choice([-1.0, 0.0, 1.0, 0.3], size=(int(rng.integers(1, 80)), int(rng.integers(1, 20))))
        y = rng.integers(0, 2, len(Z))
        assert np.array_equal(found["python"].erm_error_counts(Z, y), found["cython"].erm_error_counts(Z, y))


def test_backends_agree_on_sgd(rng):
    found = kernels.backends()
    if len(found) < 2:
        pytest.skip("compiled backend not built")
    p = mlp_init((6, 5, 4, 2), rng)
    X, out, y = rng.normal(size=(40, 6)), rng.integers(0, 2, 40).astype(np.int64), rng.normal(size=40)
    sizes = np.asarray(p.sizes, dtype=np.int64)
    a, b = p.flat.copy(), p.flat.copy()
    found["python"].sgd_sequential(a, sizes, X, out, y, 0.03)
    found["cython"].sgd_sequential(b, sizes, X, out, y, 0.03)
    assert np.max(np.abs(a - b)) < 1e-12


def test_backends_agree_on_adamw(rng):
    found = kernels.backends()
    if len(found) < 2:
        pytest.skip("compiled backend not built")
    n = 1000
    g = rng.normal(size=n)
    states = []
    for name in ("python", "cython"):
        th, m, v = np.linspace(-1, 1, n), np.zeros(n), np.zeros(n)
        for step in (1, 2, 3):
            found[name].adamw_update(th, g, m, v, 1e-2, 1e-3, 0.9, 0.999, 1e-8, step)
        states.append((th, m, v))
    for x, y in zip(*states):
        assert np.max(np.abs(x - y)) < 1e-15


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, LOCKBENCH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from lockbench import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
