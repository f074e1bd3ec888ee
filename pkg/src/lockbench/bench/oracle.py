"""Exact uniform-policy probabilities cross-checked by enumeration and Monte Carlo."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..lock import (ENUMERATION_MAX_H, LockSpec, bandit_failure_closed_form, enumerate_right_outcomes,
                    make_lock_mdp, uniform_success_terms)
from ..mdp import UniformPolicy, rollout


@dataclass
class OracleRow:
    H: int
    b: str
    left: Fraction
    right: Fraction
    enum_right: Fraction | None  # None above the enumeration guard
    rewarding_words: int | None
    word_matches_b: bool | None
    mc_rate: float | None = None
    mc_z: float | None = None

    @property
    def total(self) -> Fraction:
        return self.left + self.right

    @property
    def passed(self) -> bool:
        ok = True
        if self.enum_right is not None:
            ok &= self.enum_right == self.right and self.rewarding_words == 1 and bool(self.word_matches_b)
        if self.mc_z is not None:
            ok &= abs(self.mc_z) <= 3.0
        return bool(ok)


def monte_carlo_rate(spec: LockSpec, n: int, rng: np.random.Generator, chunk: int = 20000) -> float:
    """Fraction of uniform-policy trajectories earning any reward."""
    mdp = make_lock_mdp(spec)
    hits, left = 0, n
    while left:
        k = min(chunk, left)
        ro = rollout(mdp, UniformPolicy(), k, rng)
        hits += int(np.count_nonzero(ro.rewards.sum(axis=1) > 0))
        left -= k
    return hits / n


def oracle_row(H: int, rng: np.random.Generator, mc: int = 0, spec: LockSpec | None = None) -> OracleRow:
    spec = spec if spec is not None else LockSpec.random(H, rng)
    left, right = uniform_success_terms(spec)
    enum_right = count = match = None
    if H <= ENUMERATION_MAX_H:
        winners = [w for w, _, r in enumerate_right_outcomes(spec) if r == 1.0]
        count = len(winners)
        enum_right = Fraction(1, 2) * Fraction(count, 2 ** spec.m)
        match = count == 1 and winners[0] == tuple(spec.b)
    row = OracleRow(H, spec.bits, left, right, enum_right, count, match)
    if mc:
        p = float(left + right)
        row.mc_rate = monte_carlo_rate(spec, mc, rng)
        row.mc_z = (row.mc_rate - p) / math.sqrt(p * (1 - p) / mc)
    return row


def oracle_report(hmax: int, mc: int = 0, seed: int = 0, hmin: int = 3) -> list[OracleRow]:
    rng = np.random.default_rng(seed)
    return [oracle_row(H, rng, mc) for H in range(hmin, hmax + 1)]


def format_report(rows, bandits=((64, 16), (8, 3))) -> str:
    lines = [f"{'H':>3} {'b':<22} {'P(reward)':>14} {'right':>12} {'enum right':>12} {'words':>5} "
             f"{'MC':>9} {'z':>6}  ok"]
    for r in rows:
        enum = "-" if r.enum_right is None else str(r.enum_right)
        words = "-" if r.rewarding_words is None else str(r.rewarding_words)
        mc = "-" if r.mc_rate is None else f"{r.mc_rate:.5f}"
        z = "-" if r.mc_z is None else f"{r.mc_z:+.2f}"
        b = r.b if len(r.b) <= 22 else r.b[:19] + "..."
        lines.append(f"{r.H:>3} {b:<22} {str(r.total):>14} {str(r.right):>12} {enum:>12} {words:>5} "
                     f"{mc:>9} {z:>6}  {'yes' if r.passed else 'NO'}")
    for A, K in bandits:
        f = bandit_failure_closed_form(A, K)
        lines.append(f"bandit A={A} K={K}: failure {f} = {float(f):.6f}")
    return "\n".join(lines)
