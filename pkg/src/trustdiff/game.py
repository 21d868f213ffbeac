"""Coordination-game arithmetic and limited-trust choice sets.

Choices are the strings ``"A"`` and ``"B"``; a configuration over a graph is
a boolean vector with ``True`` meaning A.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

A = "A"
B = "B"
BOTH = frozenset((A, B))


@dataclass(frozen=True)
class PayoffMatrix:
    """Row player's payoffs: v(A,A)=a, v(B,B)=b, v(A,B)=c, v(B,A)=d.

    Construction enforces a > d, b > c, a > b and nonnegative entries. Use
    :meth:`unchecked` to build a matrix that skips these checks.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise ValueError("invalid payoff matrix: " + "; ".join(errors))

    def violations(self) -> list[str]:
        out = []
        if min(self.a, self.b, self.c, self.d) < 0:
            out.append("entries must be >= 0")
        if not self.a > self.d:
            out.append("need a > d")
        if not self.b > self.c:
            out.append("need b > c")
        if not self.a > self.b:
            out.append("need a > b")
        return out

    @classmethod
    def unchecked(cls, a, b, c, d) -> "PayoffMatrix":
        obj = object.__new__(cls)
        for name, val in zip("abcd", (a, b, c, d)):
            object.__setattr__(obj, name, val)
        return obj

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "PayoffMatrix":
        return cls(*(data[k] for k in "abcd"))

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}

    def v(self, xi: str, xj: str) -> float:
        if xi == A:
            return self.a if xj == A else self.c
        return self.d if xj == A else self.b

    @property
    def scale(self) -> float:
        """a + b - c - d, positive under the ordering constraints."""
        return self.a + self.b - self.c - self.d

    @property
    def has_welfare_gap(self) -> bool:
        return self.c + self.d <= 2 * self.b


@dataclass(frozen=True)
class TrustProfile:
    """Normalized trust limit per degree; a scalar applies to every degree."""

    normalized: float | Mapping[int, float]

    def __post_init__(self):
        vals = self.normalized.values() if isinstance(self.normalized, Mapping) else [self.normalized]
        if any(not v > 0 for v in vals):
            raise ValueError("normalized trust limits must be > 0")
        if isinstance(self.normalized, Mapping):
            object.__setattr__(self, "normalized", {int(k): v for k, v in self.normalized.items()})

    @classmethod
    def parse(cls, value) -> "TrustProfile":
        if isinstance(value, TrustProfile):
            return value
        if isinstance(value, Mapping):
            return cls({int(k): float(v) for k, v in value.items()})
        return cls(float(value))

    def normalized_limit(self, k: int):
        if isinstance(self.normalized, Mapping):
            try:
                return self.normalized[k]
            except KeyError:
                raise KeyError(f"no normalized trust limit for degree {k}") from None
        return self.normalized

    def absolute_limit(self, k: int):
        return k * self.normalized_limit(k)

    def to_json(self):
        if isinstance(self.normalized, Mapping):
            return {str(k): v for k, v in sorted(self.normalized.items())}
        return self.normalized


@dataclass(frozen=True)
class Sensitivity:
    beta: float = 1.0
    beta_sw: float = 1.0

    def __post_init__(self):
        for name in ("beta", "beta_sw"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


class LocalView(NamedTuple):
    k: int
    k_A: int

    def check(self) -> "LocalView":
        if not 0 <= self.k_A <= self.k:
            raise ValueError(f"invalid local view {tuple(self)}")
        return self


class ChoiceSets(NamedTuple):
    W: frozenset
    U: frozenset
    u_star: float
    u_prime: float
    S: frozenset
    u_A: float
    u_B: float


def local_utility(p: PayoffMatrix, view: LocalView, choice: str) -> float:
    k, k_A = view
    if choice == A:
        return k_A * p.a + (k - k_A) * p.c
    return k_A * p.d + (k - k_A) * p.b


def utility_margin(p: PayoffMatrix, view: LocalView) -> float:
    """u(A) - u(B) for the player itself."""
    k, k_A = view
    return k_A * (p.a - p.d) + (k - k_A) * (p.c - p.b)


def local_welfare_margin(p: PayoffMatrix, view: LocalView) -> float:
    """Change of social welfare when the player holds A instead of B.

    Only the player's incident edges change, so the margin is
    ``k_A(2a-c-d) + (k-k_A)(c+d-2b)``.
    """
    k, k_A = view
    return k_A * (2 * p.a - p.c - p.d) + (k - k_A) * (p.c + p.d - 2 * p.b)


def _argmax(margin) -> frozenset:
    if margin > 0:
        return frozenset((A,))
    if margin < 0:
        return frozenset((B,))
    return BOTH


def choice_sets(p: PayoffMatrix, view: LocalView, delta) -> ChoiceSets:
    """Welfare and utility maximizers plus the trust-feasible set S.

    Ties are reported as two-element sets.
    """
    u_A = local_utility(p, view, A)
    u_B = local_utility(p, view, B)
    u_star, u_prime = max(u_A, u_B), min(u_A, u_B)
    S = frozenset(x for x, u in ((A, u_A), (B, u_B)) if u >= u_star - delta)
    return ChoiceSets(
        W=_argmax(local_welfare_margin(p, view)),
        U=_argmax(u_A - u_B),
        u_star=u_star,
        u_prime=u_prime,
        S=S,
        u_A=u_A,
        u_B=u_B,
    )


def _edge_counts(g, x) -> tuple[int, int]:
    x = np.asarray(x, dtype=bool)
    e = g.edges()
    if e.size == 0:
        return 0, 0
    xu, xv = x[e[:, 0]], x[e[:, 1]]
    return int(np.sum(xu & xv)), int(np.sum(~xu & ~xv))


def potential_phi(g, x, p: PayoffMatrix):
    """(a-d)·E_AA + (b-c)·E_BB; unilateral utility changes equal its changes."""
    e_aa, e_bb = _edge_counts(g, x)
    return (p.a - p.d) * e_aa + (p.b - p.c) * e_bb


def potential_psi(g, x, p: PayoffMatrix):
    """(2a-c-d)·E_AA + (2b-c-d)·E_BB; tracks social welfare up to a constant."""
    e_aa, e_bb = _edge_counts(g, x)
    return (2 * p.a - p.c - p.d) * e_aa + (2 * p.b - p.c - p.d) * e_bb


def social_welfare(g, x, p: PayoffMatrix):
    """Sum of all players' utilities."""
    x = np.asarray(x, dtype=bool)
    k = g.degrees
    k_A = g.neighbor_sum(x)
    u = np.where(x, k_A * p.a + (k - k_A) * p.c, k_A * p.d + (k - k_A) * p.b)
    return u.sum()
