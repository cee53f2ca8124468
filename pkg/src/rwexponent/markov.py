"""Validated Markov chains, stationary laws, entropy rate and graph generators."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BadDimension,
    NonConvergence,
    NotStochastic,
    Periodic,
    Reducible,
)

ROW_SUM_TOL = 1e-9
DENSE_STATIONARY_MAX_N = 64  # GTH below this size


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic, irreducible, aperiodic transition matrix.

    Build instances with :func:`validate`; the constructor does not check
    anything. ``edges`` lists the support of ``p`` in row-major order.
    """

    n: int
    p: np.ndarray
    edges: tuple[tuple[int, int], ...]

    @cached_property
    def src(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.intp)

    @cached_property
    def dst(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.intp)

    @cached_property
    def edge_p(self) -> np.ndarray:
        """Transition probabilities listed in edge order."""
        return self.p[self.src, self.dst]

    @cached_property
    def log_edge_p(self) -> np.ndarray:
        return np.log(self.edge_p)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class SnrProfile:
    """Per-node signal mean; noise has unit variance."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ValueError("SNR profile has non-finite entries")
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.beta.size

    @property
    def half_sq(self) -> np.ndarray:
        """beta_i**2 / 2, the per-visit signal energy."""
        return 0.5 * self.beta**2


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    pi: np.ndarray
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Zero-one support pattern of a chain and its spectral radius."""

    p0: np.ndarray
    rho0: float
    edges: tuple[tuple[int, int], ...] = field(default=())

    @property
    def n(self) -> int:
        return self.p0.shape[0]


def as_snr(snr, n: int | None = None) -> SnrProfile:
    if not isinstance(snr, SnrProfile):
        snr = SnrProfile(np.asarray(snr, dtype=float))
    if n is not None and snr.n != n:
        raise BadDimension(f"SNR profile has length {snr.n}, chain has {n} nodes")
    return snr


def _reachable(adj: list[list[int]], start: int) -> np.ndarray:
    seen = np.zeros(len(adj), dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def _period(adj: list[list[int]]) -> int:
    # BFS levels from node 0; for a strongly connected graph the period is
    # the gcd of level[u] + 1 - level[v] over all edges.
    n = len(adj)
    level = [-1] * n
    level[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
    g = 0
    for u in range(n):
        for v in adj[u]:
            g = math.gcd(g, abs(level[u] + 1 - level[v]))
    return g


def validate(p) -> TransitionMatrix:
    """Check a raw matrix and return it as a :class:`TransitionMatrix`.

    Rows within ``1e-9`` of summing to one are renormalized exactly.
    """
    p = np.array(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
        raise BadDimension(f"expected a non-empty square matrix, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise BadDimension("transition matrix has non-finite entries")
    n = p.shape[0]
    if np.any(p < 0):
        i, j = map(int, np.argwhere(p < 0)[0])
        raise NotStochastic(i, float(p[i].sum()))
    sums = p.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise NotStochastic(i, float(s))
    p = p / sums[:, None]

    adj = [list(map(int, np.flatnonzero(p[i] > 0))) for i in range(n)]
    radj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in adj[i]:
            radj[j].append(i)
    fwd = _reachable(adj, 0)
    if not fwd.all():
        raise Reducible([int(i) for i in np.flatnonzero(~fwd)], "from node 0")
    bwd = _reachable(radj, 0)
    if not bwd.all():
        raise Reducible([int(i) for i in np.flatnonzero(~bwd)], "back to node 0")
    period = _period(adj)
    if period != 1:
        raise Periodic(period)

    edges = tuple((i, j) for i in range(n) for j in adj[i])
    p.setflags(write=False)
    return TransitionMatrix(n=n, p=p, edges=edges)


def _gth(p: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman state elimination (subtraction free)."""
    a = np.array(p, dtype=float)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k]
    return pi / pi.sum()


def stationary(
    chain: TransitionMatrix, tol: float = 1e-12, max_iter: int = 1_000_000
) -> StationaryDistribution:
    """Stationary distribution: GTH elimination for small chains, power iteration otherwise."""
    p = chain.p
    n = chain.n
    if n <= DENSE_STATIONARY_MAX_N:
        pi = _gth(p)
    else:
        pi = np.full(n, 1.0 / n)
        for _ in range(max_iter):
            nxt = pi @ p
            nxt /= nxt.sum()
            if np.max(np.abs(nxt - pi)) <= tol * np.max(nxt):
                pi = nxt
                break
            pi = nxt
        else:
            raise NonConvergence(f"stationary power iteration did not converge in {max_iter} steps")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ p - pi)))
    if residual > 1e-10 or np.any(pi <= 0):
        raise NonConvergence(f"stationary residual {residual:.3e}")
    return StationaryDistribution(pi=pi, residual=residual)


def entropy_rate(chain: TransitionMatrix) -> float:
    """Entropy rate in nats, ``-sum_i pi_i sum_j P_ij log P_ij``."""
    pi = stationary(chain).pi
    ep = chain.edge_p
    return float(-np.sum(pi[chain.src] * ep * np.log(ep)))


def power_iteration(
    m: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    v0: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Perron pair of a nonnegative irreducible matrix by power iteration.

    Iterates on ``m + lam I``, which shares the Perron vector with ``m``
    and is primitive even when ``m`` is only irreducible. Stops when the
    componentwise relative residual ``max_i |(m v)_i - lam v_i| / (lam v_i)``
    drops below ``tol``; this is what keeps ``m_ij v_j / (lam v_i)`` row
    sums accurate even where ``v`` is tiny.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    v = np.full(n, 1.0 / n) if v0 is None else np.abs(np.asarray(v0, dtype=float))
    if not np.all(v > 0):
        v = v + 1e-3 * v.max() + 1e-300
    v = v / v.sum()
    for _ in range(max_iter):
        mv = m @ v
        lam = mv.sum()  # v has unit 1-norm
        res = np.max(np.abs(mv - lam * v) / (lam * v))
        if res <= tol:
            return float(lam), mv / mv.sum()
        w = mv + lam * v
        v = w / w.sum()
    raise NonConvergence(f"power iteration did not reach residual {tol} in {max_iter} steps")


def sparsity_radius(chain: TransitionMatrix, tol: float = 1e-12) -> SparsityPattern:
    p0 = (chain.p > 0).astype(float)
    rho0, _ = power_iteration(p0, tol=tol)
    # a single self-loop is the only validated chain with rho0 = 1
    if not (rho0 > 1.0 or chain.n == 1):
        raise NonConvergence(f"spectral radius of the sparsity pattern is {rho0}, expected > 1")
    p0.setflags(write=False)
    return SparsityPattern(p0=p0, rho0=rho0, edges=chain.edges)


def _check_n(n: int, minimum: int = 2) -> int:
    if int(n) != n or n < minimum:
        raise BadDimension(f"need an integer n >= {minimum}, got {n!r}")
    return int(n)


def make_ring(n: int) -> TransitionMatrix:
    """Cycle on ``n`` nodes: stay, left and right with probability 1/3 each."""
    n = _check_n(n)
    p = np.zeros((n, n))
    for i in range(n):
        p[i, i] += 1 / 3
        p[i, (i + 1) % n] += 1 / 3
        p[i, (i - 1) % n] += 1 / 3
    return validate(p)


def make_chain(n: int) -> TransitionMatrix:
    """Path on ``n`` nodes; end nodes stay with probability 2/3."""
    n = _check_n(n)
    p = np.zeros((n, n))
    for i in range(n):
        if i > 0:
            p[i, i - 1] = 1 / 3
        if i < n - 1:
            p[i, i + 1] = 1 / 3
        p[i, i] = 1.0 - p[i].sum()
    return validate(p)


def make_star(n: int) -> TransitionMatrix:
    """Star with center 0 and ``n - 1`` leaves.

    The center moves uniformly over itself and all leaves; a leaf stays or
    returns to the center with probability 1/2 each.
    """
    n = _check_n(n, 3)
    if n % 2 == 0:
        raise BadDimension(f"star needs an odd node count so leaves split evenly, got {n}")
    p = np.zeros((n, n))
    p[0, :] = 1.0 / n
    for leaf in range(1, n):
        p[leaf, leaf] = 0.5
        p[leaf, 0] = 0.5
    return validate(p)


GENERATORS = {"ring": make_ring, "chain": make_chain, "star": make_star}


def make_alternating_snr(n: int, beta1: float, beta2: float, topology: str = "ring") -> SnrProfile:
    """Two-level SNR profile.

    ring/chain: ``beta1, beta2, beta1, ...`` along the nodes. star: the
    center gets ``beta2`` and the leaves alternate starting with ``beta1``.
    """
    n = _check_n(n, 1)
    if topology in ("ring", "chain"):
        beta = np.where(np.arange(n) % 2 == 0, beta1, beta2)
    elif topology == "star":
        beta = np.where(np.arange(n) % 2 == 1, beta1, beta2)
        beta[0] = beta2
    else:
        raise BadDimension(f"unknown topology {topology!r}")
    return SnrProfile(beta.astype(float))


def flow_matrix(chain: TransitionMatrix, pi: np.ndarray | None = None) -> np.ndarray:
    """Edge values of the stationary flow ``pi_i P_ij``."""
    if pi is None:
        pi = stationary(chain).pi
    return pi[chain.src] * chain.edge_p
