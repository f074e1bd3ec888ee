"""Self-checks behind the ``symcheck`` and ``gradcheck`` subcommands."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..env import CoordPermutation, EnvSession, symmetry_probe
from ..lock import LockSpec, make_lock_mdp, permutation_twin, twin_permutation
from ..mdp import State, UniformPolicy, rollout
from ..nn import (AdamWState, MlpParams, TrainingProcedure, adamw_step, coupled_training_check, cross_entropy_loss,
                  encode_states, entropy, forward, gradient_check, lift_permutation, log_softmax, mlp_init,
                  mse_loss, ppo_objective)
from ..solvers.translated import (TranslatedConfig, actor_critic_translated, fqi_translated, learn_q_functions,
                                  learning_v_function)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3g} (tol {self.tolerance:g})"


# ---------------------------------------------------------------------------
# gradients


def _pick_loss(kind: str, rng, B: int, k: int):
    """``(loss_fn, smooth)``; ``smooth(out)`` is False near a non-differentiable point."""
    always = lambda out: True
    if kind == "ce":
        y = rng.integers(0, k, size=B)
        return (lambda out: cross_entropy_loss(out, y)), always
    if kind == "mse":
        y = rng.normal(size=(B, k))
        return (lambda out: mse_loss(out, y)), always
    if kind == "entropy":
        return (lambda out: (float(entropy(out).mean()), _entropy_grad(out))), always
    a = rng.integers(0, k, size=B)
    adv = rng.normal(size=B)
    old = rng.uniform(0.2, 0.8, size=B)
    clip = 0.2

    def ppo_loss(out):
        obj, g = ppo_objective(out, a, adv, old, clip, 1e-2)
        return -obj, -g

    def smooth(out):
        ratio = np.exp(log_softmax(out))[np.arange(B), a] / old
        return bool(np.min(np.abs(np.abs(ratio - 1.0) - clip)) > 1e-3)
    return ppo_loss, smooth


def _entropy_grad(z):
    logp = log_softmax(z)
    p = np.exp(logp)
    ent = -(p * logp).sum(axis=1, keepdims=True)
    return -p * (logp + ent) / len(z)


def gradient_fixtures(n: int = 50, seed: int = 0):
    """Random small networks, batches and losses, kept away from ReLU and clip kinks."""
    rng = np.random.default_rng(seed)
    kinds = ("ce", "mse", "entropy", "ppo")
    out = []
    while len(out) < n:
        kind = kinds[len(out) % len(kinds)]
        k = 2 if kind == "ppo" else int(rng.integers(1 if kind == "mse" else 2, 4))
        sizes = (int(rng.integers(2, 7)), *rng.integers(2, 7, size=int(rng.integers(1, 3))).tolist(), k)
        params = mlp_init(sizes, rng)
        params.flat += rng.normal(scale=0.1, size=params.flat.shape)  # non-zero biases too
        X = rng.normal(size=(int(rng.integers(1, 6)), sizes[0]))
        loss, smooth = _pick_loss(kind, rng, len(X), k)
        z, cache = forward(params, X)
        if min(np.min(np.abs(pre)) for pre in cache.pre[:-1]) < 1e-3 or not smooth(z):
            continue
        out.append((kind, params, X, loss))
    return out


def adamw_oracle_error() -> float:
    """One AdamW step on a single parameter against exact rational arithmetic."""
    theta, g, lr, wd, b1, b2, eps = 1.5, 0.25, 0.1, 0.01, 0.9, 0.999, 1e-8
    params = MlpParams((1, 1), np.array([theta, 0.0]))
    grads = MlpParams((1, 1), np.array([g, 0.0]))
    adamw_step(params, grads, AdamWState.for_params(params, lr, wd, beta1=b1, beta2=b2, eps=eps))
    # m_hat = g and v_hat = g^2 after one step, so sqrt(v_hat) = |g|
    F = Fraction
    expected = F(theta) * (1 - F(lr) * F(wd)) - F(lr) * F(g) / (abs(F(g)) + F(eps))
    return abs(params.flat[0] - float(expected))


def gradcheck(n_fixtures: int = 50, seed: int = 0, tolerance: float = 1e-4) -> list[CheckResult]:
    worst = {}
    for kind, params, X, loss in gradient_fixtures(n_fixtures, seed):
        err = gradient_check(params, X, loss)
        worst[kind] = max(worst.get(kind, 0.0), err)
    results = [CheckResult(f"backward with {k} loss", v <= tolerance, v, tolerance) for k, v in sorted(worst.items())]
    err = adamw_oracle_error()
    results.append(CheckResult("one-step AdamW vs exact arithmetic", err <= 1e-12, err, 1e-12))
    return results


# ---------------------------------------------------------------------------
# symmetry


def gc_style_dataset(H: int, I: int, rng: np.random.Generator):
    """Pairs ``[enc(s_t); enc(s_H)]`` labelled with ``a_t`` from uniform trajectories."""
    mdp = make_lock_mdp(LockSpec.random(H, rng))
    ro = rollout(mdp, UniformPolicy(), I, rng)
    X, y = [], []
    for t in range(H):
        X.append(np.concatenate([encode_states(t, ro.states[:, t], H), encode_states(H, ro.states[:, H], H)], axis=1))
        y.append(ro.actions[:, t])
    return np.concatenate(X), np.concatenate(y).astype(np.intp), mdp


def coupling_checks(seed: int = 0, n_perms: int = 20, steps: int = 200, H: int = 6, I: int = 60,
                    tolerance: float = 1e-9) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    X, y, mdp = gc_style_dataset(H, I, rng)
    probes = X[rng.choice(len(X), size=32, replace=False)] + rng.normal(scale=0.1, size=(32, X.shape[1]))
    results = []
    for opt, lr in (("sgd", 0.05), ("adamw", 1e-2)):
        proc = TrainingProcedure(optimizer=opt, lr=lr, weight_decay=1e-3 if opt == "adamw" else 0.0, steps=steps)
        worst = 0.0
        for k in range(n_perms):
            p = lift_permutation(CoordPermutation.random(mdp.state_dim, rng), H, copies=2)
            worst = max(worst, coupled_training_check(X, y, p, proc, probes, tolerance, seed=seed * 1000 + k).max_deviation)
        results.append(CheckResult(f"coupled {opt} training, {n_perms} permutations", worst <= tolerance, worst, tolerance))
    return results


def evaluation_symmetry_check(seed: int = 0, H: int = 5, tolerance: float = 1e-9) -> CheckResult:
    """``f(s, D) == f'(p(s), p(D))`` for the chunk-trained evaluation functions."""
    rng = np.random.default_rng(seed)
    spec = LockSpec.random(H, rng)
    cfg = TranslatedConfig(K=4, I=10, seed=seed)
    worst = 0.0
    for kind in ("fqi", "actor_critic"):
        session = EnvSession(make_lock_mdp(spec), rng)
        if kind == "fqi":
            F = learn_q_functions(H, spec.n, cfg)
            fqi_translated(session, cfg, F)
        else:
            F = [learning_v_function(H, spec.n, cfg)]
            actor_critic_translated(session, cfg, rng, F)
        probes = [r.s for r in session.data][:10]
        probes += [State(H, rng.integers(0, 2, size=spec.n).astype(float)) for _ in range(5)]
        report = symmetry_probe(F, session.data, CoordPermutation.random(spec.n, rng), probes, tolerance)
        worst = max(worst, report.max_deviation)
    return CheckResult("evaluation functions commute with coordinate permutations", worst <= tolerance,
                       worst, tolerance)


def twin_runs(method: str, seed: int, H: int = 4, cfg: TranslatedConfig | None = None):
    """Run a translated learner on a lock MDP and on its permutation twin with coupled seeds.

    Returns ``(run_a, run_b, session_a)``.
    """
    spec = LockSpec.random(H, np.random.default_rng([seed, 7]))
    p = twin_permutation(spec, 1, 2)
    cfg = cfg or TranslatedConfig(K=8 if method == "fqi" else 24, I=12, seed=seed)
    sessions = [EnvSession(make_lock_mdp(spec), np.random.default_rng([seed, 8])),
                EnvSession(permutation_twin(spec, p), np.random.default_rng([seed, 8]))]
    if method == "fqi":
        F = learn_q_functions(H, spec.n, cfg)
        runs = [fqi_translated(sessions[0], cfg, F), fqi_translated(sessions[1], cfg, [f.permuted(p) for f in F])]
    else:
        F = [learning_v_function(H, spec.n, cfg)]
        runs = [actor_critic_translated(sessions[0], cfg, np.random.default_rng([seed, 9]), F),
                actor_critic_translated(sessions[1], cfg, np.random.default_rng([seed, 9]), [F[0].permuted(p)])]
    return runs[0], runs[1], sessions[0]


def indistinguishability_check(method: str, seeds, H: int = 4, tolerance: float = 1e-9) -> CheckResult:
    worst, same = 0.0, True
    for seed in seeds:
        a, b, _ = twin_runs(method, seed, H)
        same &= a.actions == b.actions
        va, vb = np.array(a.values), np.array(b.values)
        worst = max(worst, float(np.max(np.abs(va - vb))) if va.shape == vb.shape else np.inf)
    ok = bool(same and worst <= tolerance)
    return CheckResult(f"{method} translated twins act identically", ok, worst if same else np.inf, tolerance)


def symcheck(seed: int = 0) -> list[CheckResult]:
    return [*coupling_checks(seed), evaluation_symmetry_check(seed),
            indistinguishability_check("fqi", [seed]), indistinguishability_check("actor_critic", [seed])]
