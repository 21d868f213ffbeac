"""Linear-threshold form of synchronous best-response LTE.

A player adopts A exactly when the fraction of its neighbors in A reaches
its threshold q*, which folds the payoff matrix and the player's normalized
trust limit into one number.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dynamics import Configuration, Trajectory, run_synchronous
from .game import PayoffMatrix, TrustProfile
from .graph import Graph


@dataclass(frozen=True)
class ThresholdParams:
    q_w: float
    q_u: float
    delta_tilde: float
    q_star: float
    exact: Fraction  # q* in exact arithmetic, used for threshold comparisons


def q_star(p: PayoffMatrix, delta_prime) -> ThresholdParams:
    """Welfare/utility indifference fractions and the effective threshold.

    ``q* = min(max(q_w, q_u - dt), q_u + dt)`` with ``dt = delta' / (a+b-c-d)``.
    """
    if not delta_prime > 0:
        raise ValueError("delta_prime must be > 0")
    a, b, c, d = (Fraction(v) for v in (p.a, p.b, p.c, p.d))
    s = a + b - c - d
    if s <= 0:
        raise ValueError("a + b - c - d must be positive")
    dp = Fraction(delta_prime)
    q_w = max(Fraction(0), (2 * b - c - d) / (2 * s))
    q_u = (b - c) / s
    dt = dp / s
    q = min(max(q_w, q_u - dt), q_u + dt)
    return ThresholdParams(float(q_w), float(q_u), float(dt), float(q), q)


def lt_step(g: Graph, x, thresholds: Sequence) -> Configuration:
    """One synchronous threshold round; isolated players keep their choice.

    ``thresholds`` holds one value per player (floats, Fractions or
    :class:`ThresholdParams`). Comparisons ``k_A / k >= q`` are exact.
    """
    choices = x.choices if isinstance(x, Configuration) else np.asarray(x, dtype=bool)
    if len(thresholds) != g.n:
        raise ValueError("need one threshold per player")
    q = [t.exact if isinstance(t, ThresholdParams) else Fraction(t) for t in thresholds]
    k_A = g.neighbor_sum(choices).tolist()
    deg = g.degrees.tolist()
    nxt = choices.copy()
    cache: dict = {}
    for i, (k, ka) in enumerate(zip(deg, k_A)):
        if k == 0:
            continue
        key = (k, ka, q[i])
        if key not in cache:
            cache[key] = Fraction(ka, k) >= q[i]
        nxt[i] = cache[key]
    return Configuration.from_choices(g, nxt)


def run_sync_lt(g: Graph, p: PayoffMatrix, trust: TrustProfile, init: Configuration,
                horizon: int, stride: int = 1, record_states: bool = False) -> Trajectory:
    """Iterate threshold rounds with per-degree q* until fixed point, cycle or horizon."""
    trust = TrustProfile.parse(trust)
    per_degree: dict[int, Fraction] = {}

    def decide(k, k_A):
        if k == 0:
            return False  # unused: isolated players keep their state
        if k not in per_degree:
            per_degree[k] = q_star(p, trust.normalized_limit(k)).exact
        return Fraction(k_A, k) >= per_degree[k]

    return run_synchronous(g, init, decide, horizon, p, stride=stride, record_states=record_states)
