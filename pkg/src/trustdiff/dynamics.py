"""Diffusion processes on explicit graphs.

Three update rules are provided: asynchronous NE logit, asynchronous
stochastic LTE, and synchronous deterministic best-response LTE (BR-LTE).
Whenever a decision must pick one choice out of a tie, it picks A.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np

from .game import (
    A,
    B,
    LocalView,
    PayoffMatrix,
    Sensitivity,
    TrustProfile,
    choice_sets,
    local_welfare_margin,
    utility_margin,
)
from .graph import Graph

Model = Literal["NE", "LTE", "BR_LTE"]
MODELS = ("NE", "LTE", "BR_LTE")
STRATEGIES = ("proportional", "high_degree_first", "uniform_random")

_CHUNK = 1 << 16


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def ne_choice_prob(p: PayoffMatrix, view: LocalView, beta: float) -> float:
    """Logit probability of A under self-interested play."""
    return sigmoid(beta * utility_margin(p, view))


def _lte_pair(p: PayoffMatrix, view: LocalView, delta, sens: Sensitivity) -> tuple[float, float]:
    cs = choice_sets(p, view, delta)
    both = cs.W & cs.U
    if both:
        return (1.0, 0.0) if A in both else (0.0, 1.0)
    if cs.u_prime >= cs.u_star - delta:
        z = sens.beta_sw * local_welfare_margin(p, view)
    else:
        z = sens.beta * utility_margin(p, view)
    return sigmoid(z), sigmoid(-z)


def lte_choice_prob(p: PayoffMatrix, view: LocalView, delta, sens: Sensitivity) -> float:
    """Probability of A under the stochastic limited-trust rule.

    ``delta`` is the absolute trust limit of the player (degree times the
    normalized limit). If A and B both maximize welfare and utility, A is
    taken with probability 1.
    """
    return _lte_pair(p, view, delta, sens)[0]


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def br_lte_choice(p: PayoffMatrix, view: LocalView, delta) -> str:
    """Deterministic limited-trust best response.

    Evaluated in exact rational arithmetic on the given float inputs so that
    boundary cases agree with the threshold form.
    """
    k, k_A = view
    a, b, c, d = (_exact(v) for v in (p.a, p.b, p.c, p.d))
    gap = k_A * (a - d) + (k - k_A) * (c - b)
    if abs(gap) <= _exact(delta):
        welfare = k_A * (2 * a - c - d) + (k - k_A) * (c + d - 2 * b)
        return A if welfare >= 0 else B
    return A if gap > 0 else B


def choice_prob_tables(p: PayoffMatrix, k: int, delta, sens: Sensitivity,
                       model: str) -> tuple[np.ndarray, np.ndarray]:
    """P(A | k, k_A) and P(B | k, k_A) for ``k_A = 0..k``.

    Both are evaluated directly, so neither loses accuracy near 0 to
    cancellation against the other.
    """
    if model == "NE":
        z = [sens.beta * utility_margin(p, LocalView(k, j)) for j in range(k + 1)]
        pairs = [(sigmoid(v), sigmoid(-v)) for v in z]
    elif model == "LTE":
        pairs = [_lte_pair(p, LocalView(k, j), delta, sens) for j in range(k + 1)]
    else:
        raise ValueError(f"no choice probabilities for model {model!r}")
    arr = np.array(pairs, dtype=float).reshape(k + 1, 2)
    return arr[:, 0], arr[:, 1]


def choice_prob_table(p: PayoffMatrix, k: int, delta, sens: Sensitivity, model: str) -> np.ndarray:
    """P(A | k, k_A) for ``k_A = 0..k``."""
    return choice_prob_tables(p, k, delta, sens, model)[0]


@dataclass
class Configuration:
    """Choice vector (True = A) with cached A-neighbor counts."""

    choices: np.ndarray
    a_neighbor_count: np.ndarray

    @classmethod
    def from_choices(cls, g: Graph, choices) -> "Configuration":
        x = np.asarray(choices, dtype=bool).copy()
        if x.shape != (g.n,):
            raise ValueError(f"configuration has shape {x.shape}, graph has {g.n} players")
        return cls(x, g.neighbor_sum(x))

    @classmethod
    def uniform(cls, g: Graph, choice: str) -> "Configuration":
        return cls.from_choices(g, np.full(g.n, choice == A))

    def copy(self) -> "Configuration":
        return Configuration(self.choices.copy(), self.a_neighbor_count.copy())

    @property
    def n_A(self) -> int:
        return int(self.choices.sum())

    def is_coherent(self, g: Graph) -> bool:
        return bool(np.array_equal(self.a_neighbor_count, g.neighbor_sum(self.choices)))

    def flip(self, g: Graph, i: int) -> None:
        new = not self.choices[i]
        self.choices[i] = new
        self.a_neighbor_count[g.neighbors(i)] += 1 if new else -1


@dataclass(frozen=True)
class DynamicsParams:
    model: str
    payoff: PayoffMatrix
    trust: TrustProfile
    sens: Sensitivity = field(default_factory=Sensitivity)
    horizon: int = 10_000
    stop_on_consensus: bool = True
    metric_stride: int | None = None  # None: n for async runs, 1 for sync runs

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.metric_stride is not None and self.metric_stride < 1:
            raise ValueError("metric_stride must be >= 1")


@dataclass
class Trajectory:
    samples: list[tuple[int, float, float]]
    final_state: Configuration
    terminated_by: str
    steps: int
    cycle_length: int | None = None
    states: list[np.ndarray] | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "adoption_fraction", "average_utility"])
        for s, frac, util in self.samples:
            w.writerow([s, repr(float(frac)), repr(float(util))])
        return buf.getvalue()

    def summary(self, model: str, seed=None) -> dict:
        _, frac, util = self.samples[-1]
        out = {
            "model": model,
            "seed": seed,
            "terminated_by": self.terminated_by,
            "steps": self.steps,
            "final_adoption": float(frac),
            "final_avg_utility": float(util),
        }
        if self.cycle_length is not None:
            out["cycle_length"] = self.cycle_length
        return out


def trajectory_metrics(g: Graph, x, p: PayoffMatrix) -> tuple[float, float]:
    """Adoption fraction of A and mean per-player utility."""
    if isinstance(x, Configuration):
        choices, k_A = x.choices, x.a_neighbor_count
    else:
        choices = np.asarray(x, dtype=bool)
        k_A = g.neighbor_sum(choices)
    if g.n == 0:
        return 0.0, 0.0
    k = g.degrees
    u = np.where(choices, k_A * p.a + (k - k_A) * p.c, k_A * p.d + (k - k_A) * p.b)
    return float(choices.mean()), float(u.mean())


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def allocate_seeds(g: Graph, fraction: float, strategy: str = "proportional", rng=None) -> Configuration:
    """Initial configuration with ``round(fraction * n)`` players in A."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown allocation strategy {strategy!r}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = g.n
    m = _round_half_up(fraction * n)
    x = np.zeros(n, dtype=bool)
    if strategy == "high_degree_first":
        order = np.lexsort((np.arange(n), -g.degrees))
        x[order[:m]] = True
    elif strategy == "uniform_random":
        x[rng.choice(n, size=m, replace=False)] = True
    else:
        ks, sizes = np.unique(g.degrees, return_counts=True)
        quota = {int(k): min(_round_half_up(fraction * s), int(s)) for k, s in zip(ks, sizes)}
        size = {int(k): int(s) for k, s in zip(ks, sizes)}
        # largest classes absorb the rounding remainder first
        order = sorted(size, key=lambda k: (-size[k], k))
        diff = m - sum(quota.values())
        while diff:
            moved = False
            for k in order:
                if diff > 0 and quota[k] < size[k]:
                    quota[k] += 1
                    diff -= 1
                    moved = True
                elif diff < 0 and quota[k] > 0:
                    quota[k] -= 1
                    diff += 1
                    moved = True
                if not diff:
                    break
            if not moved:
                break
        for k in sorted(quota):
            members = np.flatnonzero(g.degrees == k)
            x[rng.choice(members, size=quota[k], replace=False)] = True
    return Configuration.from_choices(g, x)


def _degree_tables(g: Graph, params: DynamicsParams) -> dict[int, list[float]]:
    return {
        int(k): choice_prob_table(
            params.payoff, int(k), params.trust.absolute_limit(int(k)) if k else 1.0,
            params.sens, params.model,
        ).tolist()
        for k in np.unique(g.degrees)
    }


def run_async(g: Graph, params: DynamicsParams, init: Configuration, rng=None) -> Trajectory:
    """Asynchronous logit-style dynamics (NE or stochastic LTE).

    At every step one player is drawn uniformly and redraws its choice from
    its local choice probability. Metrics are sampled every
    ``metric_stride`` steps and at termination.
    """
    if params.model not in ("NE", "LTE"):
        raise ValueError("run_async needs model NE or LTE")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = g.n
    stride = params.metric_stride or max(n, 1)
    p = params.payoff
    tables = _degree_tables(g, params)
    deg = g.degrees.tolist()
    player_table = [tables[k] for k in deg]
    nbrs = g.adjacency
    x = init.choices.tolist()
    k_A = init.a_neighbor_count.tolist()
    n_A = sum(x)

    def snapshot(step):
        conf = Configuration(np.array(x, dtype=bool), np.array(k_A, dtype=np.int64))
        frac, util = trajectory_metrics(g, conf, p)
        samples.append((step, frac, util))
        return conf

    def consensus():
        if n_A == n:
            return "consensus_A"
        if n_A == 0:
            return "consensus_B"
        return None

    samples: list[tuple[int, float, float]] = []
    snapshot(0)
    reason = consensus() if params.stop_on_consensus else None
    step = 0
    T = params.horizon
    while reason is None and step < T:
        size = min(_CHUNK, T - step)
        picks = rng.integers(0, n, size=size).tolist()
        draws = rng.random(size).tolist()
        for i, r in zip(picks, draws):
            step += 1
            new = r < player_table[i][k_A[i]]
            if new != x[i]:
                x[i] = new
                inc = 1 if new else -1
                n_A += inc
                for j in nbrs[i]:
                    k_A[j] += inc
                if params.stop_on_consensus and (n_A == 0 or n_A == n):
                    reason = consensus()
                    break
            if step % stride == 0:
                snapshot(step)
    if reason is None:
        reason = "horizon"
    if not samples or samples[-1][0] != step:
        final = snapshot(step)
    else:
        final = Configuration(np.array(x, dtype=bool), np.array(k_A, dtype=np.int64))
    return Trajectory(samples, final, reason, step)


def _sync_decision_table(g: Graph, decide) -> np.ndarray:
    """Flat lookup ``table[offset[i] + k_A[i]]`` of next choices (True = A)."""
    deg = g.degrees
    ks = np.unique(deg)
    offsets = {}
    flat: list[bool] = []
    for k in ks.tolist():
        offsets[k] = len(flat)
        flat.extend(decide(k, j) for j in range(k + 1))
    base = np.array([offsets[k] for k in deg.tolist()], dtype=np.int64)
    return np.array(flat, dtype=bool), base


def run_synchronous(g: Graph, init: Configuration, decide, horizon: int, payoff: PayoffMatrix,
                    stride: int = 1, record_states: bool = False) -> Trajectory:
    """Iterate a deterministic synchronous rule ``decide(k, k_A) -> bool``.

    Isolated players keep their state. Stops at a fixed point, at the first
    revisit of an earlier state (cycle) or at ``horizon`` rounds.
    """
    flat, base = _sync_decision_table(g, decide)
    isolated = g.degrees == 0
    x = init.choices.copy()
    seen = {x.tobytes(): 0}
    states = [x.copy()] if record_states else None
    samples = [(0, *trajectory_metrics(g, x, payoff))]
    t = 0
    reason, cycle = "horizon", None
    while t < horizon:
        k_A = g.neighbor_sum(x)
        nxt = np.where(isolated, x, flat[base + k_A])
        if np.array_equal(nxt, x):
            reason = "fixed_point"
            break
        t += 1
        x = nxt
        if record_states:
            states.append(x.copy())
        if t % stride == 0:
            samples.append((t, *trajectory_metrics(g, x, payoff)))
        key = x.tobytes()
        if key in seen:
            reason, cycle = "cycle", t - seen[key]
            break
        seen[key] = t
    if samples[-1][0] != t:
        samples.append((t, *trajectory_metrics(g, x, payoff)))
    return Trajectory(samples, Configuration.from_choices(g, x), reason, t, cycle, states)


def run_sync_br(g: Graph, params: DynamicsParams, init: Configuration,
                record_states: bool = False) -> Trajectory:
    """Synchronous BR-LTE: every player plays ``br_lte_choice`` at once."""
    if params.model != "BR_LTE":
        raise ValueError("run_sync_br needs model BR_LTE")
    p, trust = params.payoff, params.trust

    def decide(k, k_A):
        if k == 0:
            return False  # unused: isolated players keep their state
        delta = k * _exact(trust.normalized_limit(k))
        return br_lte_choice(p, LocalView(k, k_A), delta) == A

    return run_synchronous(g, init, decide, params.horizon, p,
                           stride=params.metric_stride or 1, record_states=record_states)
