"""Mean-field reduction of the diffusion to an absorbing lattice Markov chain.

The state ``y = (y_1, ..., y_K)`` counts the A-players in each degree class.
Each step one player is drawn uniformly; a degree-``k`` player adopts A with
probability ``Q(A | k, theta(y))``, the choice probability averaged over a
``Binomial(k, theta)`` number of A-neighbors, where ``theta(y)`` is the
degree-weighted adoption fraction. The all-B and all-A states absorb.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .dynamics import choice_prob_tables
from .game import PayoffMatrix, Sensitivity, TrustProfile

logger = logging.getLogger(__name__)

MAX_STATES = 5_000_000
DIRECT_LIMIT = 100_000


class ChainError(RuntimeError):
    """Base class for chain construction and solver failures."""


class StateSpaceTooLarge(ChainError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"state space has {required} states, cap is {cap}; "
                         f"raise max_states to at least {required}")
        self.required = required
        self.cap = cap


class SolverError(ChainError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ChainSpec:
    """Degree-class counts ``(n_1, ..., n_K)`` plus the game parameters."""

    degree_counts: tuple[int, ...]
    payoff: PayoffMatrix
    trust: TrustProfile
    sens: Sensitivity = field(default_factory=Sensitivity)
    model: str = "LTE"

    def __post_init__(self):
        counts = tuple(int(c) for c in self.degree_counts)
        object.__setattr__(self, "degree_counts", counts)
        object.__setattr__(self, "trust", TrustProfile.parse(self.trust))
        if any(c < 0 for c in counts):
            raise ValueError("degree counts must be nonnegative")
        if sum(counts) < 2:
            raise ValueError("chain needs n >= 2 players")
        if self.model not in ("NE", "LTE"):
            raise ValueError(f"chain model must be NE or LTE, got {self.model!r}")
        for k in self.degrees:
            self.trust.normalized_limit(k)  # KeyError for a missing degree

    @classmethod
    def from_counts(cls, counts: Mapping[int, int] | Sequence[int], **kwargs) -> "ChainSpec":
        """Accept ``{k: n_k}`` or a sequence indexed from degree 1."""
        if isinstance(counts, Mapping):
            ks = {int(k): int(v) for k, v in counts.items()}
            if any(k < 1 for k in ks):
                raise ValueError("degrees must be >= 1")
            K = max(ks)
            counts = [ks.get(k, 0) for k in range(1, K + 1)]
        return cls(tuple(counts), **kwargs)

    @property
    def K(self) -> int:
        return len(self.degree_counts)

    @property
    def n(self) -> int:
        return sum(self.degree_counts)

    @property
    def degrees(self) -> list[int]:
        """Degrees with at least one player."""
        return [k for k, c in enumerate(self.degree_counts, start=1) if c]

    @property
    def degree_sum(self) -> int:
        return sum(k * c for k, c in enumerate(self.degree_counts, start=1))

    @property
    def mean_degree(self) -> float:
        return self.degree_sum / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.degree_counts)

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    @property
    def is_1d(self) -> bool:
        return len(self.degrees) == 1

    def index(self, y: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(v) for v in y), self.shape))

    def state(self, index: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(index, self.shape))

    def full_state(self) -> tuple[int, ...]:
        return self.degree_counts


def mf_theta(spec: ChainSpec, y: Sequence[int]) -> float:
    """Probability that a uniformly chosen edge end is an A-player."""
    y = np.asarray(y)
    if y.shape != (spec.K,) or np.any(y < 0) or np.any(y > np.array(spec.degree_counts)):
        raise ValueError(f"state {tuple(y)} is outside the lattice")
    ks = np.arange(1, spec.K + 1)
    return float(np.dot(ks, y) / spec.degree_sum)


def _binomial_weights(k: int, theta: np.ndarray) -> np.ndarray:
    """Binomial(k, theta) pmf for each theta, shape ``(len(theta), k + 1)``.

    Built with the ratio recurrence in log space; endpoints are exact.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.zeros((theta.size, k + 1))
    out[theta <= 0, 0] = 1.0
    out[theta >= 1, k] = 1.0
    mid = (theta > 0) & (theta < 1)
    if mid.any():
        t = theta[mid]
        log_odds = np.log(t) - np.log1p(-t)
        logw = np.empty((t.size, k + 1))
        logw[:, 0] = k * np.log1p(-t)
        for j in range(k):
            logw[:, j + 1] = logw[:, j] + np.log((k - j) / (j + 1)) + log_odds
        out[mid] = np.exp(logw)
    return out


def _probability_tables(spec: ChainSpec, k: int):
    delta = k * spec.trust.normalized_limit(k)
    return choice_prob_tables(spec.payoff, k, delta, spec.sens, spec.model)


def q_adopt_pair(spec: ChainSpec, k: int, theta) -> tuple[np.ndarray, np.ndarray]:
    """(Q, 1 - Q) for a degree-``k`` player, each summed directly."""
    p_a, p_b = _probability_tables(spec, k)
    w = _binomial_weights(k, theta)
    return w @ p_a, w @ p_b


def q_adopt(spec: ChainSpec, k: int, theta: float) -> float:
    """Q(A | k, theta): the choice probability averaged over Bin(k, theta) A-neighbors."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    return float(q_adopt_pair(spec, k, theta)[0][0])


@dataclass
class TransitionTable:
    """Sparse one-step transition matrix over the lexicographic lattice.

    ``out_rate`` holds the total probability of leaving each state; the
    transient block of ``I - T`` uses it as its diagonal so that slow states
    keep full relative accuracy.
    """

    spec: ChainSpec
    P: sp.csr_matrix
    out_rate: np.ndarray
    forward: np.ndarray   # (n_states, K)
    backward: np.ndarray  # (n_states, K)
    absorbing_B: int = 0
    absorbing_A: int = -1

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def row(self, state) -> list[tuple[tuple[int, ...], float]]:
        i = state if isinstance(state, (int, np.integer)) else self.spec.index(state)
        lo, hi = self.P.indptr[i], self.P.indptr[i + 1]
        return [(self.spec.state(int(j)), float(v))
                for j, v in zip(self.P.indices[lo:hi], self.P.data[lo:hi])]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.P.sum(axis=1)).ravel()

    def transient(self) -> np.ndarray:
        mask = np.ones(self.n_states, dtype=bool)
        mask[[self.absorbing_B, self.absorbing_A]] = False
        return mask


def build_chain(spec: ChainSpec, max_states: int = MAX_STATES) -> TransitionTable:
    """Forward, backward and self-loop probabilities for every lattice state."""
    n_states = spec.n_states
    if n_states > max_states:
        raise StateSpaceTooLarge(n_states, max_states)
    shape = spec.shape
    n = spec.n
    Y = np.stack(np.unravel_index(np.arange(n_states), shape), axis=1).astype(np.int64)
    ks = np.arange(1, spec.K + 1)
    theta = (Y @ ks) / spec.degree_sum
    counts = np.array(spec.degree_counts)
    forward = np.zeros((n_states, spec.K))
    backward = np.zeros((n_states, spec.K))
    for k in spec.degrees:
        col = k - 1
        q, q_not = q_adopt_pair(spec, k, theta)
        forward[:, col] = (counts[col] - Y[:, col]) / n * q
        backward[:, col] = Y[:, col] / n * q_not
    absorbing_A = n_states - 1
    forward[[0, absorbing_A]] = 0.0
    backward[[0, absorbing_A]] = 0.0
    out_rate = forward.sum(axis=1) + backward.sum(axis=1)

    strides = np.array([int(np.prod(shape[c + 1:])) for c in range(spec.K)], dtype=np.int64)
    idx = np.arange(n_states, dtype=np.int64)
    rows, cols, vals = [idx], [idx], [1.0 - out_rate]
    for col in range(spec.K):
        f = forward[:, col] > 0
        rows.append(idx[f]); cols.append(idx[f] + strides[col]); vals.append(forward[f, col])
        b = backward[:, col] > 0
        rows.append(idx[b]); cols.append(idx[b] - strides[col]); vals.append(backward[b, col])
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_states, n_states))
    P.sort_indices()
    return TransitionTable(spec, P, out_rate, forward, backward, 0, absorbing_A)


@dataclass
class AbsorptionResult:
    """Absorption probabilities and expected absorption times for every state.

    Arrays are indexed by lexicographic state index; absorbing states carry
    their trivial values (w = 0 or 1, tau = 0).
    """

    spec: ChainSpec | None
    w_all_A: np.ndarray
    w_all_B: np.ndarray
    tau: np.ndarray
    solver: str
    residual: float = float("nan")
    impassable: list[int] = field(default_factory=list)

    def at(self, y) -> tuple[float, float]:
        i = self.spec.index(y) if self.spec is not None else int(y[0])
        return float(self.w_all_A[i]), float(self.tau[i])

    def states(self):
        for i in range(self.w_all_A.size):
            yield (self.spec.state(i) if self.spec is not None else (i,))


def _reachability_check(table: TransitionTable) -> None:
    targets = [table.absorbing_B, table.absorbing_A]
    # reverse-graph search from the absorbers
    Pt = table.P.T.tocsr()
    reach = np.zeros(table.n_states, dtype=bool)
    for t in targets:
        order = csgraph.breadth_first_order(Pt, t, directed=True, return_predecessors=False)
        reach[order] = True
    if not reach.all():
        bad = np.flatnonzero(~reach)
        raise SolverError(f"{bad.size} transient state(s) cannot reach an absorbing state, "
                          f"e.g. {table.spec.state(int(bad[0]))}")


def _gauss_seidel(M: sp.csr_matrix, rhs: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, float]:
    lower = sp.tril(M, format="csr")
    upper = sp.triu(M, k=1, format="csr")
    x = np.zeros_like(rhs)
    res = np.inf
    for it in range(1, max_iter + 1):
        x = spla.spsolve_triangular(lower, rhs - upper @ x, lower=True)
        if it % 10 == 0 or it == max_iter:
            res = float(np.max(np.abs(M @ x - rhs)) / max(1.0, float(np.max(np.abs(x)))))
            if res < tol:
                return x, res
    raise SolverError(f"Gauss-Seidel did not converge in {max_iter} iterations", res)


def _bandwidth(M: sp.spmatrix) -> int:
    C = M.tocoo()
    return int(np.max(np.abs(C.row - C.col), initial=0))


def _gth_banded_factor(M: sp.csr_matrix, s: np.ndarray, bw: int) -> np.ndarray:
    """In-place banded LU of an M-matrix without subtractive cancellation.

    ``s`` holds the row sums of ``M`` (the absorption rates, computed
    directly). Off-diagonal updates add nonpositive terms; each pivot is
    rebuilt as ``s_i - sum of remaining off-diagonals``, with ``s`` carried
    through the elimination by nonnegative updates.
    """
    N = M.shape[0]
    band = np.zeros((N + bw, 2 * bw + 1))
    C = M.tocoo()
    off = C.row != C.col
    band[C.row[off], C.col[off] - C.row[off] + bw] = C.data[off]
    s = np.concatenate([s.astype(float), np.zeros(bw)])
    t = np.arange(1, bw + 1)
    u = np.arange(1, bw + 1)
    cols = bw + u[None, :] - t[:, None]  # row k+t, column k+u
    diag_mask = cols == bw
    for k in range(N):
        pivot = s[k] - band[k, bw + 1:].sum()
        if not pivot > 0:
            raise SolverError(f"zero pivot at transient state {k}")
        band[k, bw] = pivot
        rows = k + t
        lower = band[rows, bw - t]  # m_{k+t, k}
        if not lower.any():
            continue
        l = lower / pivot
        band[rows, bw - t] = l
        upper = band[k, bw + 1:]
        upd = -l[:, None] * upper[None, :]  # <= 0 entries
        upd[diag_mask] = 0.0
        band[rows[:, None], cols] += upd
        s[k + 1:k + bw + 1] -= l * s[k]
    return band[:N]


def _gth_banded_solve(band: np.ndarray, bw: int, rhs: np.ndarray) -> np.ndarray:
    N = band.shape[0]
    y = rhs.astype(float).copy()
    for i in range(1, N):
        lo = max(0, i - bw)
        y[i] -= np.dot(band[i, lo - i + bw:bw], y[lo:i])
    x = np.zeros(N)
    for i in range(N - 1, -1, -1):
        hi = min(N, i + bw + 1)
        x[i] = (y[i] - np.dot(band[i, bw + 1:bw + hi - i], x[i + 1:hi])) / band[i, bw]
    return x


GTH_MAX_CELLS = 20_000_000


def solve_absorption(table: TransitionTable, direct_limit: int = DIRECT_LIMIT,
                     tol: float = 1e-10, max_iter: int = 1_000_000,
                     method: str = "auto") -> AbsorptionResult:
    """Solve ``(I - T) w = R_A`` and ``(I - T) tau = 1`` over transient states.

    ``method`` is ``"gth"`` (banded elimination with entrywise relative
    accuracy, the default when the band fits in memory), ``"splu"`` (sparse
    LU) or ``"gauss_seidel"``; ``"auto"`` uses a direct method up to
    ``direct_limit`` transient states and Gauss-Seidel above it.
    """
    _reachability_check(table)
    tr = table.transient()
    t_idx = np.flatnonzero(tr)
    P_tt = table.P[t_idx][:, t_idx].tolil()
    P_tt.setdiag(0.0)
    M = (sp.diags(table.out_rate[t_idx]) - P_tt.tocsr()).tocsr()
    M.eliminate_zeros()
    r_A = np.asarray(table.P[t_idx][:, [table.absorbing_A]].todense()).ravel()
    r_B = np.asarray(table.P[t_idx][:, [table.absorbing_B]].todense()).ravel()
    ones = np.ones(t_idx.size)
    bw = max(_bandwidth(M), 1)
    if method == "auto":
        if t_idx.size > direct_limit:
            method = "gauss_seidel"
        elif t_idx.size * (2 * bw + 1) <= GTH_MAX_CELLS:
            method = "gth"
        else:
            method = "splu"
    if method == "gth":
        band = _gth_banded_factor(M, r_A + r_B, bw)
        w_A, w_B, tau = (_gth_banded_solve(band, bw, r) for r in (r_A, r_B, ones))
        solver = "banded_gth"
    elif method == "splu":
        try:
            lu = spla.splu(M.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"singular system: {exc}") from exc
        w_A, w_B, tau = lu.solve(r_A), lu.solve(r_B), lu.solve(ones)
        solver = "sparse_lu"
    elif method == "gauss_seidel":
        w_A, _ = _gauss_seidel(M, r_A, tol, max_iter)
        w_B, _ = _gauss_seidel(M, r_B, tol, max_iter)
        tau, _ = _gauss_seidel(M, ones, tol, max_iter)
        solver = "gauss_seidel"
    else:
        raise ValueError(f"unknown method {method!r}")
    if not (np.all(np.isfinite(w_A)) and np.all(np.isfinite(tau))):
        raise SolverError("solution is not finite (ill-conditioned system)")
    residual = max(
        float(np.max(np.abs(M @ w_A - r_A), initial=0.0)),
        float(np.max(np.abs(M @ w_B - r_B), initial=0.0)),
        float(np.max(np.abs(M @ tau - ones), initial=0.0)) / max(1.0, float(np.max(tau, initial=0.0))),
    )
    N = table.n_states
    W_A, W_B, Tau = np.zeros(N), np.zeros(N), np.zeros(N)
    W_A[table.absorbing_A] = 1.0
    W_B[table.absorbing_B] = 1.0
    W_A[t_idx] = np.clip(w_A, 0.0, 1.0)
    W_B[t_idx] = np.clip(w_B, 0.0, 1.0)
    Tau[t_idx] = tau
    return AbsorptionResult(table.spec, W_A, W_B, Tau, solver, residual)


def birth_death_rates(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """Forward/backward probabilities ``a_y``, ``b_y`` of a one-class chain, y = 0..n."""
    if not spec.is_1d:
        raise ValueError("closed form needs exactly one populated degree class")
    (k,) = spec.degrees
    n = spec.n
    y = np.arange(n + 1)
    q, q_not = q_adopt_pair(spec, k, y / n)
    a = (n - y) / n * q
    b = y / n * q_not
    a[[0, n]] = 0.0
    b[[0, n]] = 0.0
    return a, b


def _laeacc(x: np.ndarray) -> np.ndarray:
    return np.logaddexp.accumulate(x) if x.size else x


def _closed_form_arrays(a: np.ndarray, b: np.ndarray):
    """W^n, W^0 and tau of a birth-death chain on 0..n with a_j > 0 inside.

    With r_j = b_j / a_j and rho_i = prod_{j<i} r_j this uses
    W^n_y = C_y / C_n (C_m = rho_1 + ... + rho_m) and
    tau_y = (C_y K_y + G_y H_y) / C_n, where G, K and H are the suffix and
    prefix sums of the double-sum formula, all accumulated in log space.
    """
    n = a.size - 1
    W = np.zeros(n + 1)
    W0 = np.zeros(n + 1)
    tau = np.zeros(n + 1)
    W[n], W0[0] = 1.0, 1.0
    if n < 2:
        return W, W0, tau
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    log_r = np.full(n + 1, -np.inf)
    log_r[1:n] = log_b[1:n] - log_a[1:n]
    # log rho_i, i = 1..n
    log_rho = np.zeros(n + 1)
    log_rho[0] = -np.inf
    log_rho[2:] = np.cumsum(log_r[1:n])
    log_C = np.full(n + 1, -np.inf)
    log_C[1:] = _laeacc(log_rho[1:])
    log_tail = np.full(n + 2, -np.inf)  # log sum_{i >= m} rho_i
    log_tail[1:n + 1] = _laeacc(log_rho[1:][::-1])[::-1]
    ys = np.arange(1, n)
    W[ys] = np.exp(log_C[ys] - log_C[n])
    W0[ys] = np.exp(log_tail[ys + 1] - log_C[n])

    log_G = np.zeros(n + 1)  # G_{n-1} = 1
    for j in range(n - 2, 0, -1):
        log_G[j] = np.logaddexp(0.0, log_r[j + 1] + log_G[j + 1])
    g_over_a = log_G[1:n] - log_a[1:n]
    log_K = np.full(n + 1, -np.inf)
    log_K[1:n] = _laeacc(g_over_a[::-1])[::-1]
    log_H = np.full(n + 1, -np.inf)
    for y in range(1, n - 1):
        log_H[y + 1] = np.logaddexp(log_H[y], log_C[y] - log_a[y]) + log_r[y + 1]
    tau[ys] = np.exp(np.logaddexp(log_C[ys] + log_K[ys], log_H[ys] + log_G[ys]) - log_C[n])
    return W, W0, tau


def _banded_tau(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.size - 1
    m = n - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -a[1:n - 1]
    ab[1] = a[1:n] + b[1:n]
    ab[2, :-1] = -b[2:n]
    tau = np.zeros(n + 1)
    tau[1:n] = solve_banded((1, 1), ab, np.ones(m))
    return tau


def closed_form_1d(spec: ChainSpec) -> AbsorptionResult:
    """Exact absorption quantities of a one-degree-class chain.

    If some forward rate ``a_j`` is exactly zero, states at or below the
    highest such ``j`` can never reach all-A; they get ``w = 0``, the cut is
    listed in ``impassable`` and tau falls back to a banded solve.
    """
    a, b = birth_death_rates(spec)
    n = spec.n
    blocked = [j for j in range(1, n) if a[j] == 0.0]
    if not blocked:
        W, W0, tau = _closed_form_arrays(a, b)
        res = AbsorptionResult(spec, W, W0, tau, "closed_form")
    else:
        cut = max(blocked)
        logger.warning("impassable forward rate at y=%d; states y <= %d cannot reach all-A", cut, cut)
        W = np.zeros(n + 1)
        W0 = np.ones(n + 1)
        sub_a, sub_b = a[cut:].copy(), b[cut:].copy()
        sub_a[0] = sub_b[0] = 0.0
        sW, sW0, _ = _closed_form_arrays(sub_a, sub_b)
        W[cut:], W0[cut:] = sW, sW0
        if any(b[j] == 0.0 and a[j] == 0.0 for j in range(1, n)):
            raise SolverError("a state with zero forward and backward rate never absorbs")
        tau = _banded_tau(a, b)
        res = AbsorptionResult(spec, W, W0, tau, "closed_form+banded_tau", impassable=blocked)
    res.residual = one_step_residual_1d(a, b, res)
    return res


def one_step_residual_1d(a, b, res: AbsorptionResult) -> float:
    """Largest violation of first-step equations at transient states."""
    n = a.size - 1
    if n < 2:
        return 0.0
    y = np.arange(1, n)
    W, tau = res.w_all_A, res.tau
    rw = (a[y] + b[y]) * W[y] - a[y] * W[y + 1] - b[y] * W[y - 1]
    rt = (a[y] + b[y]) * tau[y] - a[y] * tau[y + 1] - b[y] * tau[y - 1] - 1.0
    return float(max(np.max(np.abs(rw)), np.max(np.abs(rt)) / max(1.0, float(tau.max()))))


def one_step_residual(table: TransitionTable, res: AbsorptionResult) -> tuple[float, float]:
    """Max |w - P w| and max |tau - 1 - T tau| over transient states."""
    tr = table.transient()
    w_err = np.abs(res.w_all_A - table.P @ res.w_all_A)[tr]
    tau_t = np.where(tr, res.tau, 0.0)
    t_err = np.abs(res.tau - 1.0 - table.P @ tau_t)[tr]
    return float(w_err.max(initial=0.0)), float(t_err.max(initial=0.0))


def analyze(spec: ChainSpec, max_states: int = MAX_STATES) -> AbsorptionResult:
    """Closed form for one degree class, sparse solve otherwise."""
    if spec.is_1d:
        return closed_form_1d(spec)
    return solve_absorption(build_chain(spec, max_states))


@dataclass
class SeedSet:
    alpha: float
    states: list[tuple[int, ...]]
    min_seeds: int | None = None
    upper_interval: bool | None = None


def seed_set(result: AbsorptionResult, alpha: float) -> SeedSet:
    """States from which all-A is reached with probability at least ``alpha``.

    For a one-class chain ``min_seeds`` is the smallest qualifying total and
    ``upper_interval`` reports whether the set is ``{min_seeds, ..., n}``.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    hits = np.flatnonzero(result.w_all_A >= alpha)
    spec = result.spec
    states = [spec.state(int(i)) if spec is not None else (int(i),) for i in hits]
    out = SeedSet(alpha, states)
    if spec is None or spec.is_1d:
        totals = sorted(sum(s) for s in states)
        if totals:
            out.min_seeds = totals[0]
            n = spec.n if spec is not None else result.w_all_A.size - 1
            out.upper_interval = totals == list(range(totals[0], n + 1))
    return out


def monotonicity_violations(result: AbsorptionResult, tol: float = 1e-12) -> list[tuple[tuple[int, ...], int]]:
    """Lattice edges (state, axis) where w decreases when one more player holds A."""
    spec = result.spec
    grid = result.w_all_A.reshape(spec.shape)
    bad = []
    for axis in range(spec.K):
        if spec.shape[axis] < 2:
            continue
        diff = np.diff(grid, axis=axis)
        for idx in zip(*np.nonzero(diff < -tol)):
            bad.append((tuple(int(v) for v in idx), axis))
    return bad
