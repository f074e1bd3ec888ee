"""Sweep execution, success evaluation and the results CSV."""
from __future__ import annotations

import csv
import logging
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..env import EnvSession
from ..lock import LockMdp, LockSpec, make_lock_mdp
from ..mdp import Policy, rollout
from ..solvers import TreeSearchPolicy, fqi, gc_exact, gc_neural, ppo
from .config import ExperimentConfig

log = logging.getLogger(__name__)

CSV_FIELDS = ("method", "horizon", "run", "seed", "b", "success", "env_calls", "seconds")
WORKERS_ENV = "LOCKBENCH_WORKERS"


@dataclass(frozen=True)
class RunResult:
    method: str
    horizon: int
    run: int
    seed: int
    b: str
    success: int
    env_calls: int
    seconds: float | None = None

    @property
    def key(self):
        return (self.method, self.horizon, self.run)

    def to_row(self) -> dict:
        return {
            "method": self.method, "horizon": str(self.horizon), "run": str(self.run),
            "seed": str(self.seed), "b": self.b, "success": str(self.success),
            "env_calls": str(self.env_calls),
            "seconds": "" if self.seconds is None else f"{self.seconds:.3f}",
        }

    @classmethod
    def from_row(cls, row: dict) -> "RunResult":
        try:
            success = int(row["success"])
            if success not in (0, 1):
                raise ValueError(f"success must be 0 or 1, got {success}")
            b = row["b"]
            if set(b) - {"0", "1"}:
                raise ValueError(f"bad word {b!r}")
            return cls(row["method"], int(row["horizon"]), int(row["run"]), int(row["seed"]), b,
                       success, int(row["env_calls"]), float(row["seconds"]) if row["seconds"] else None)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed result row {row!r}: {exc}") from None


def sort_key(r: RunResult):
    return (r.method, r.horizon, r.run)


def write_csv(path, results) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in sorted(results, key=sort_key):
            w.writerow(r.to_row())
    os.replace(tmp, path)


def read_csv(path) -> list[RunResult]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
            raise ValueError(f"{path}: header must be {','.join(CSV_FIELDS)}")
        return [RunResult.from_row(row) for row in reader]


# ---------------------------------------------------------------------------
# seeds and evaluation


def run_seed(master_seed: int, method: str, H: int, run: int) -> int:
    tag = zlib.crc32(method.encode())
    return int(np.random.SeedSequence([master_seed, tag, H, run]).generate_state(1)[0])


def run_word(cfg: ExperimentConfig, H: int, run: int) -> LockSpec:
    """Fixed word if configured, else sampled from ``(master_seed, H, run)``.

    The word does not depend on the method, so all methods face the same problems.
    """
    if H in cfg.b:
        return LockSpec.from_bits(H, cfg.b[H])
    return LockSpec.random(H, np.random.default_rng([cfg.master_seed, H, run, 0xB]))


def evaluate_success(policy: Policy, mdp: LockMdp, n_eval: int, rng: np.random.Generator) -> int:
    """1 iff some evaluation trajectory took the right branch and earned the final reward."""
    if n_eval < 1:
        raise ValueError("n_eval must be >= 1")
    ro = rollout(mdp, policy, n_eval, rng)
    right = ro.states[:, 1, mdp.layout.c] == 1.0
    return int(np.any(right & (ro.rewards[:, -1] == 1.0)))


def train(method: str, mdp: LockMdp, budget, rng: np.random.Generator, seed: int):
    """Return ``(policy, env_calls)``; ``env_calls`` counts transitions sampled in training."""
    H = mdp.horizon
    if method == "gc_exact":
        return gc_exact(mdp, budget.N, budget.alpha, rng), budget.N * H
    if method == "gc_neural":
        return gc_neural(mdp, budget, rng), budget.I * H
    if method == "fqi":
        return fqi(mdp, budget, rng), budget.K * budget.I * H
    if method == "ppo":
        return ppo(mdp, budget, rng), budget.K * budget.I * H
    if method == "tree_search":
        session = EnvSession(make_lock_mdp(mdp.spec), np.random.default_rng([seed, 2]))
        return TreeSearchPolicy(session, budget.H_S, np.random.default_rng([seed, 3])), session
    raise ValueError(f"unknown method {method!r}")


def run_one(cfg: ExperimentConfig, method: str, H: int, run: int) -> RunResult:
    seed = run_seed(cfg.master_seed, method, H, run)
    spec = run_word(cfg, H, run)
    mdp = make_lock_mdp(spec)
    t0 = time.perf_counter()
    policy, calls = train(method, mdp, cfg.budget(method), np.random.default_rng([seed, 0]), seed)
    success = evaluate_success(policy, mdp, cfg.n_eval, np.random.default_rng([seed, 1]))
    if isinstance(calls, EnvSession):
        calls = calls.call_count  # the planner only touches the interface while acting
    seconds = time.perf_counter() - t0 if cfg.record_seconds else None
    return RunResult(method, H, run, seed, spec.bits, success, int(calls), seconds)


def _task(args):
    return run_one(*args)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


def run_sweep(cfg: ExperimentConfig, out=None, workers: int | None = None) -> list[RunResult]:
    """Run every (method, horizon, run) task and return the sorted results.

    With ``out`` set, rows are appended as they finish and finished keys in
    an existing file are skipped, so an interrupted sweep can be resumed. The
    file is rewritten in canonical order at the end.
    """
    workers = worker_count() if workers is None else workers
    done: dict = {}
    if out is not None and Path(out).exists() and Path(out).stat().st_size:
        for r in read_csv(out):
            expected = run_seed(cfg.master_seed, r.method, r.horizon, r.run)
            if r.seed != expected:
                raise ValueError(f"{out}: row {r.key} has seed {r.seed}, this config gives {expected}")
            done[r.key] = r
    tasks = [(cfg, m, H, k) for m in cfg.methods for H in cfg.horizons for k in range(cfg.runs)
             if (m, H, k) not in done]
    log.info("%d tasks to run, %d already done, %d workers", len(tasks), len(done), workers)

    sink = None
    if out is not None:
        fresh = not Path(out).exists() or not Path(out).stat().st_size
        sink = open(out, "a", newline="")
        writer = csv.DictWriter(sink, CSV_FIELDS, lineterminator="\n")
        if fresh:
            writer.writeheader()

    def record(r: RunResult):
        done[r.key] = r
        log.info("%s H=%d run=%d success=%d", r.method, r.horizon, r.run, r.success)
        if sink is not None:
            writer.writerow(r.to_row())
            sink.flush()

    try:
        if workers <= 1 or len(tasks) <= 1:
            for t in tasks:
                record(_task(t))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for fut in as_completed([pool.submit(_task, t) for t in tasks]):
                    record(fut.result())
    finally:
        if sink is not None:
            sink.close()
    wanted = {(m, H, k) for m in cfg.methods for H in cfg.horizons for k in range(cfg.runs)}
    results = sorted((r for key, r in done.items() if key in wanted), key=sort_key)
    if out is not None:
        write_csv(out, done.values())
    return results


def success_table(results) -> dict:
    """``{method: {H: (successes, runs)}}``."""
    table: dict = {}
    for r in results:
        s, n = table.setdefault(r.method, {}).get(r.horizon, (0, 0))
        table[r.method][r.horizon] = (s + r.success, n + 1)
    return table
