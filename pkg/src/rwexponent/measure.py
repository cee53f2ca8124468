"""Edge measures on the circulation polytope and their entropy functionals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SupportViolation
from .markov import SnrProfile, TransitionMatrix, as_snr

DELTA_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EdgeMeasure:
    """Nonnegative values on a fixed edge list.

    ``theta[e]`` is the mass on edge ``(src[e], dst[e])``. Entries are
    stored on edges only; use :meth:`dense` for the full matrix.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    theta: np.ndarray

    @classmethod
    def on_chain(cls, chain: TransitionMatrix, values) -> "EdgeMeasure":
        values = np.asarray(values, dtype=float)
        if values.shape != (chain.num_edges,):
            raise ValueError(f"expected {chain.num_edges} edge values, got shape {values.shape}")
        return cls(chain.n, chain.src, chain.dst, values)

    @classmethod
    def from_dense(cls, theta, edges=None) -> "EdgeMeasure":
        """Restrict a dense matrix to ``edges`` (default: its own support).

        Raises :class:`SupportViolation` if ``theta`` has mass off ``edges``.
        """
        theta = np.asarray(theta, dtype=float)
        n = theta.shape[0]
        if edges is None:
            edges = [(int(i), int(j)) for i, j in zip(*np.nonzero(theta))]
        src = np.array([e[0] for e in edges], dtype=np.intp)
        dst = np.array([e[1] for e in edges], dtype=np.intp)
        mask = np.ones_like(theta, dtype=bool)
        mask[src, dst] = False
        if np.any(theta[mask] != 0):
            raise SupportViolation("matrix has mass outside the edge set")
        return cls(n, src, dst, theta[src, dst].copy())

    @cached_property
    def theta_bar(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.theta, minlength=self.n)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.src, self.dst), self.theta)
        return out

    def conditional(self) -> np.ndarray:
        """Empirical transition matrix ``theta_ij / theta_bar_i`` (zero rows stay zero)."""
        out = self.dense()
        tb = self.theta_bar
        nz = tb > 0
        out[nz] /= tb[nz, None]
        return out

    def with_values(self, values) -> "EdgeMeasure":
        return EdgeMeasure(self.n, self.src, self.dst, np.asarray(values, dtype=float))


def _xlogy_ratio(theta: np.ndarray, denom: np.ndarray) -> np.ndarray:
    """theta * log(theta / denom) with 0 log 0 = 0."""
    out = np.zeros_like(theta)
    nz = theta > 0
    out[nz] = theta[nz] * np.log(theta[nz] / denom[nz])
    return out


def edge_entropy(theta: EdgeMeasure) -> float:
    """Entropy rate of the empirical chain of ``theta``, in nats."""
    tb = theta.theta_bar[theta.src]
    return float(max(0.0, -np.sum(_xlogy_ratio(theta.theta, tb))))


def relative_entropy(theta: EdgeMeasure, chain: TransitionMatrix) -> float:
    """KL divergence rate of the empirical chain of ``theta`` from ``chain``."""
    p = chain.p[theta.src, theta.dst]
    if np.any((p <= 0) & (theta.theta > 0)):
        raise SupportViolation("edge measure puts mass on a transition with P_ij = 0")
    tb = theta.theta_bar[theta.src]
    return float(np.sum(_xlogy_ratio(theta.theta, tb * np.where(p > 0, p, 1.0))))


def snr_rate(theta: EdgeMeasure, snr: SnrProfile) -> float:
    """Expected per-step signal energy ``sum_i theta_bar_i beta_i^2 / 2``."""
    snr = as_snr(snr, theta.n)
    return float(theta.theta_bar @ snr.half_sq)


def delta_membership(theta, edges, tol: float = DELTA_TOL) -> bool:
    """True iff the dense matrix ``theta`` lies in the circulation polytope on ``edges``."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        return False
    if np.any(theta < 0) or not np.all(np.isfinite(theta)):
        return False
    if abs(theta.sum() - 1.0) > tol:
        return False
    if np.max(np.abs(theta.sum(axis=1) - theta.sum(axis=0))) > tol:
        return False
    off = np.ones_like(theta, dtype=bool)
    for i, j in edges:
        off[i, j] = False
    return not np.any(theta[off] != 0)
