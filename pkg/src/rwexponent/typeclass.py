"""Markov types, Gauss-Markov types and small-instance counting.

Sequences use 0-based node indices. A sequence is read as circular: the
closing transition ``s_t -> s_1`` is counted along with the others, so
count matrices always have equal row and column sums.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import IndexOutOfRange, InstanceTooLarge, LengthMismatch
from .markov import SparsityPattern
from .measure import EdgeMeasure, delta_membership, edge_entropy

MAX_ENUM_T = 12
MAX_ENUM_N = 5
MAX_ENUM_COUNT = 2_000_000  # sequences held in memory at once
LINEAR_WHITTLE_MAX_T = 20
TYPE_ROUND_TOL = 1e-9

__all__ = [
    "TransitionCounts",
    "GaussMarkovType",
    "transition_counts",
    "markov_type",
    "gauss_markov_type",
    "walk_count",
    "enumerate_sequences",
    "type_class_counts",
    "count_type_class",
    "log_whittle_bounds",
    "whittle_bounds",
    "delta_membership",
    "rate_function",
]


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    """Circular transition counts ``k`` of a length-``t`` sequence."""

    k: np.ndarray
    t: int

    @property
    def n(self) -> int:
        return self.k.shape[0]

    @cached_property
    def visits(self) -> np.ndarray:
        """``k_i`` = number of visits to node ``i`` (row sums)."""
        return self.k.sum(axis=1)

    def key(self) -> bytes:
        return self.k.tobytes()


@dataclass(frozen=True, eq=False)
class GaussMarkovType:
    """Markov type ``theta`` with per-node signal sums ``xi`` (both divided by ``t``)."""

    theta: np.ndarray
    xi: np.ndarray
    t: int

    @property
    def theta_bar(self) -> np.ndarray:
        return self.theta.sum(axis=1)

    @property
    def visit_average(self) -> np.ndarray:
        """Per-visit signal average ``sum z / K_i``; zero on unvisited nodes."""
        tb = self.theta_bar
        out = np.zeros_like(self.xi)
        nz = tb > 0
        out[nz] = self.xi[nz] / tb[nz]
        return out


def _as_states(seq, n: int) -> np.ndarray:
    s = np.asarray(seq)
    if s.ndim != 1 or s.size == 0:
        raise LengthMismatch("state sequence must be a non-empty 1-d array")
    if not np.issubdtype(s.dtype, np.integer):
        if not np.all(s == np.round(s)):
            raise IndexOutOfRange("state indices must be integers")
        s = s.astype(np.int64)
    if s.min() < 0 or s.max() >= n:
        raise IndexOutOfRange(f"state indices must lie in [0, {n - 1}]")
    return s.astype(np.int64)


def transition_counts(seq, n: int) -> TransitionCounts:
    s = _as_states(seq, n)
    k = np.zeros((n, n), dtype=np.int64)
    np.add.at(k, (s, np.roll(s, -1)), 1)
    return TransitionCounts(k=k, t=int(s.size))


def markov_type(seq, n: int) -> np.ndarray:
    c = transition_counts(seq, n)
    return c.k / c.t


def gauss_markov_type(seq, z, n: int) -> GaussMarkovType:
    s = _as_states(seq, n)
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != s.size:
        raise LengthMismatch(f"{s.size} states but {z.size} observations")
    xi = np.bincount(s, weights=z, minlength=n) / s.size
    return GaussMarkovType(theta=markov_type(s, n), xi=xi, t=int(s.size))


def walk_count(pattern: SparsityPattern, t: int) -> int:
    """Number of length-``t`` walks along the pattern, ``1' P0^(t-1) 1``, in exact integers."""
    p0 = [[int(x) for x in row] for row in np.asarray(pattern.p0)]
    n = len(p0)
    vec = [1] * n
    for _ in range(t - 1):
        vec = [sum(p0[i][j] * vec[j] for j in range(n)) for i in range(n)]
    return sum(vec)


def _check_enum(pattern: SparsityPattern, t: int) -> None:
    if t < 1:
        raise InstanceTooLarge(f"sequence length must be positive, got {t}")
    if t > MAX_ENUM_T or pattern.n > MAX_ENUM_N:
        raise InstanceTooLarge(
            f"enumeration limited to t <= {MAX_ENUM_T} and N <= {MAX_ENUM_N}, got t={t}, N={pattern.n}"
        )
    count = walk_count(pattern, t)
    if count > MAX_ENUM_COUNT:
        raise InstanceTooLarge(f"{count} sequences exceed the enumeration cap {MAX_ENUM_COUNT}")


def _walk_array(pattern: SparsityPattern, t: int) -> np.ndarray:
    # extend all walks one step at a time; rows stay in lexicographic order
    p0 = np.asarray(pattern.p0) > 0
    walks = np.arange(pattern.n, dtype=np.int64)[:, None]
    for _ in range(t - 1):
        last = walks[:, -1]
        rows, nxt = np.nonzero(p0[last])
        walks = np.concatenate([walks[rows], nxt[:, None]], axis=1)
    return walks


def enumerate_sequences(pattern: SparsityPattern, t: int) -> list[tuple[int, ...]]:
    """All length-``t`` walks along the pattern, any start node, in lexicographic order."""
    _check_enum(pattern, t)
    return [tuple(int(v) for v in row) for row in _walk_array(pattern, t)]


def type_class_counts(pattern: SparsityPattern, t: int) -> dict[bytes, tuple[TransitionCounts, int]]:
    """Group every walk by its circular count matrix.

    Returns ``{key: (counts, number of walks)}``; iteration follows the first
    lexicographic walk of each class.
    """
    _check_enum(pattern, t)
    n = pattern.n
    walks = _walk_array(pattern, t)
    flat = walks * n + np.roll(walks, -1, axis=1)
    k = np.zeros((walks.shape[0], n * n), dtype=np.int64)
    np.add.at(k, (np.arange(walks.shape[0])[:, None], flat), 1)
    tally = Counter(map(bytes, k))
    out: dict[bytes, tuple[TransitionCounts, int]] = {}
    for row in k:
        key = bytes(row)
        if key not in out:
            counts = TransitionCounts(k=row.reshape(n, n).copy(), t=t)
            out[counts.key()] = (counts, tally[key])
    return out


def _integer_counts(theta: np.ndarray, t: int) -> np.ndarray | None:
    scaled = theta * t
    k = np.round(scaled)
    if np.any(np.abs(scaled - k) > TYPE_ROUND_TOL * max(1, t)):
        return None
    k = k.astype(np.int64)
    if k.sum() != t or np.any(k < 0):
        return None
    return k


def count_type_class(theta, t: int, pattern: SparsityPattern | None = None) -> int:
    """Number of feasible length-``t`` sequences whose Markov type is ``theta``.

    ``theta`` is an :class:`EdgeMeasure` or a dense matrix. Without a pattern
    every transition is allowed. Returns 0 when ``theta * t`` is not an
    integer matrix, since no sequence can have that type.
    """
    dense = theta.dense() if isinstance(theta, EdgeMeasure) else np.asarray(theta, dtype=float)
    n = dense.shape[0]
    if pattern is None:
        pattern = SparsityPattern(p0=np.ones((n, n)), rho0=float(n))
    _check_enum(pattern, t)
    k = _integer_counts(dense, t)
    if k is None:
        return 0
    hit = type_class_counts(pattern, t).get(k.tobytes())
    return 0 if hit is None else hit[1]


def log_whittle_bounds(counts: TransitionCounts) -> tuple[float, float]:
    """Natural logs of the Euler-circuit bracket on the type-class size.

    ``prod_i (k_i - 1)! / prod k_ij!  <=  C  <=  N prod_i k_i! / prod k_ij!``,
    products over visited nodes. Valid for count matrices that some
    sequence realizes.
    """
    k = np.asarray(counts.k)
    visits = k.sum(axis=1)
    seen = visits[visits > 0].astype(float)
    denom = float(sum(math.lgamma(x + 1.0) for x in k.ravel() if x > 0))
    lo = float(sum(math.lgamma(x) for x in seen)) - denom
    hi = math.log(k.shape[0]) + float(sum(math.lgamma(x + 1.0) for x in seen)) - denom
    return lo, hi


def whittle_bounds(counts: TransitionCounts) -> tuple[float, float]:
    """The bracket of :func:`log_whittle_bounds` in linear scale.

    Up to ``t = 20`` both ends are exact rationals rounded once, so a class
    whose size meets a bound exactly is never pushed outside by round-off.
    Longer sequences go through the logs and may overflow to ``inf``.
    """
    k = np.asarray(counts.k)
    if counts.t > LINEAR_WHITTLE_MAX_T:
        lo, hi = log_whittle_bounds(counts)
        with np.errstate(over="ignore"):
            return float(np.exp(lo)), float(np.exp(hi))
    visits = [int(x) for x in k.sum(axis=1) if x > 0]
    denom = math.prod(math.factorial(int(x)) for x in k.ravel())
    lo = Fraction(math.prod(math.factorial(x - 1) for x in visits), denom)
    hi = Fraction(k.shape[0] * math.prod(math.factorial(x) for x in visits), denom)
    return float(lo), float(hi)


def _j_theta(theta_bar: np.ndarray, xi: np.ndarray) -> float:
    if np.any((theta_bar <= 0) & (xi != 0)):
        return math.inf
    pos = theta_bar > 0
    return float(np.sum(xi[pos] ** 2 / (2.0 * theta_bar[pos])))


def rate_function(theta, xi, pattern: SparsityPattern) -> float:
    """Large-deviations rate of the Gauss-Markov type ``(theta, xi)``.

    ``log rho0 - H(theta) + J(xi)`` with ``J(xi) = sum xi_i^2 / (2 theta_bar_i)``,
    or ``inf`` when ``theta`` leaves the polytope or ``J(xi) > H(theta)``.
    """
    dense = theta.dense() if isinstance(theta, EdgeMeasure) else np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    edges = pattern.edges or tuple(zip(*map(lambda a: a.tolist(), np.nonzero(pattern.p0))))
    if dense.shape != (pattern.n, pattern.n) or xi.size != pattern.n:
        return math.inf
    if not delta_membership(dense, edges):
        return math.inf
    em = EdgeMeasure.from_dense(dense, edges)
    h = edge_entropy(em)
    j = _j_theta(em.theta_bar, xi)
    if j > h:
        return math.inf
    return math.log(pattern.rho0) - h + j
