"""Single-parameter solution path for the lower bound.

Optimizers of the convex program are tilted chains ``Q(alpha)`` built
from the Perron pair of ``M(alpha)_ij = P_ij^alpha exp(-alpha (1 - alpha) beta_i^2 / 2)``.
The optimal ``alpha`` solves ``H(alpha) = alpha^2 R(alpha)``, which we find
by bisection on ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, NonConvergence, NotApplicable
from .markov import TransitionMatrix, _gth, as_snr, entropy_rate, power_iteration, stationary, validate
from .measure import EdgeMeasure, delta_membership, edge_entropy, snr_rate


@dataclass(frozen=True, eq=False)
class AlphaSolution:
    alpha_star: float
    lam: float
    v: np.ndarray
    theta: EdgeMeasure
    value: float
    iters: int = 0


def m_alpha(chain: TransitionMatrix, snr, alpha: float) -> np.ndarray:
    """Tilted matrix; on edges ``P^0`` is taken as 1, so ``M(0)`` is the sparsity pattern."""
    snr = as_snr(snr, chain.n)
    m = np.zeros((chain.n, chain.n))
    if alpha == 0:
        ep = np.ones(chain.num_edges)
    else:
        ep = chain.edge_p**alpha
    m[chain.src, chain.dst] = ep * np.exp(-alpha * (1.0 - alpha) * snr.half_sq[chain.src])
    return m


def _dense_perron_guess(m: np.ndarray) -> tuple[float, np.ndarray]:
    w, vecs = np.linalg.eig(m)
    k = int(np.argmax(w.real))
    v = np.abs(vecs[:, k].real)
    return float(w[k].real), v


def _inverse_polish(m: np.ndarray, lam: float, v: np.ndarray, tol: float, steps: int = 8) -> np.ndarray:
    # (sigma I - m)^-1 is entrywise positive for sigma above the Perron
    # value, so the iterates stay positive and converge almost at once
    n = m.shape[0]
    shifted = (lam * (1.0 + 1e-8) + 1e-300) * np.eye(n) - m
    v = v + 1e-300
    for _ in range(steps):
        try:
            w = np.linalg.solve(shifted, v)
        except np.linalg.LinAlgError:
            break
        if not np.all(w > 0):
            break
        v = w / w.sum()
        mv = m @ v
        if np.max(np.abs(mv - mv.sum() * v) / (mv.sum() * v)) <= tol:
            break
    return v


def perron(m, tol: float = 1e-12, max_iter: int = 1_000_000, warm_start: bool = True):
    """Perron value and right Perron vector (unit 1-norm, strictly positive).

    A dense eigensolve and a few shifted inverse-iteration steps seed the
    power iteration, which certifies the pair to relative residual ``tol``.
    Without the warm start this is plain power iteration, which can need
    very many steps when the spectral gap is small.
    """
    m = np.asarray(m, dtype=float)
    v0 = None
    if warm_start:
        lam0, v0 = _dense_perron_guess(m)
        v0 = _inverse_polish(m, lam0, v0, tol)
    lam, v = power_iteration(m, tol=tol, max_iter=max_iter, v0=v0)
    if not np.all(v > 0):
        raise NonConvergence("Perron vector has non-positive entries")
    return lam, v


def tilted_chain(
    chain: TransitionMatrix, snr, alpha: float, max_iter: int = 1_000_000
) -> tuple[np.ndarray, float, np.ndarray]:
    """Return ``(Q(alpha), lambda, v)``."""
    m = m_alpha(chain, snr, alpha)
    lam, v = perron(m, max_iter=max_iter)
    q = m * v[None, :] / (lam * v[:, None])
    return q, lam, v


def theta_of_alpha(chain: TransitionMatrix, snr, alpha: float) -> EdgeMeasure:
    q, _, _ = tilted_chain(chain, snr, alpha)
    return _theta_from_q(chain, q)


def _theta_from_q(chain: TransitionMatrix, q: np.ndarray) -> EdgeMeasure:
    row_err = float(np.max(np.abs(q.sum(axis=1) - 1.0)))
    if row_err > 1e-10:
        raise NonConvergence(f"tilted chain rows off by {row_err:.3e}")
    qm = validate(q)
    pi = stationary(qm).pi
    theta = EdgeMeasure.on_chain(chain, pi[chain.src] * qm.p[chain.src, chain.dst])
    if not delta_membership(theta.dense(), chain.edges):
        raise NonConvergence("tilted flow left the circulation polytope")
    return theta


def _theta_row_normalized(chain: TransitionMatrix, snr, alpha: float) -> EdgeMeasure:
    # Q from the best available vector, normalized row by row rather than by
    # lambda v_i; identical to Q(alpha) when v is an exact eigenvector
    m = m_alpha(chain, snr, alpha)
    lam0, v0 = _dense_perron_guess(m)
    v = _inverse_polish(m, lam0, v0, 1e-12)
    q = m * v[None, :]
    q /= q.sum(axis=1, keepdims=True)
    # stationary() insists on pi > 0; here entries may underflow to zero,
    # which H and R handle through 0 log 0 = 0
    pi = _gth(q)
    return EdgeMeasure.on_chain(chain, pi[chain.src] * q[chain.src, chain.dst])


def balance(chain: TransitionMatrix, snr, alpha: float, max_iter: int = 20_000) -> float:
    """``H(alpha) - alpha^2 R(alpha)``; decreasing on ``[0, 1]``.

    When the Perron gap of ``M(alpha)`` is below double precision (strongly
    separated SNR levels, ``alpha`` far from the root) the eigenvector cannot
    be certified componentwise; the value then comes from the row-normalized
    tilt, which is accurate enough to fix the sign of a value that is far
    from zero there.
    """
    try:
        q, _, _ = tilted_chain(chain, snr, alpha, max_iter=max_iter)
        theta = _theta_from_q(chain, q)
    except NonConvergence:
        theta = _theta_row_normalized(chain, snr, alpha)
    return edge_entropy(theta) - alpha**2 * snr_rate(theta, snr)


def solve_alpha(chain: TransitionMatrix, snr, tol: float = 1e-10) -> AlphaSolution:
    """Bisect for the root of :func:`balance` and return the tilted optimizer.

    Only defined when the walk is detectable, ``H(P) < sum pi_i beta_i^2 / 2``.
    """
    from .bounds import objective  # bounds imports markov/measure only; avoid a cycle at import time

    snr = as_snr(snr, chain.n)
    pi = stationary(chain).pi
    if entropy_rate(chain) >= float(pi @ snr.half_sq):
        raise NotApplicable("H(P) >= R(P): the lower bound is zero and no alpha* exists")
    lo, hi = 0.0, 1.0
    f_lo, f_hi = balance(chain, snr, lo), balance(chain, snr, hi)
    if not (f_lo > 0 and f_hi < 0):
        raise BracketFailure(f"balance has f(0) = {f_lo:.3e}, f(1) = {f_hi:.3e}")
    iters = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if balance(chain, snr, mid) > 0:
            lo = mid
        else:
            hi = mid
        iters += 1
    alpha = 0.5 * (lo + hi)
    m = m_alpha(chain, snr, alpha)
    lam, v = perron(m)
    q = m * v[None, :] / (lam * v[:, None])
    theta = _theta_from_q(chain, q)
    return AlphaSolution(
        alpha_star=alpha,
        lam=lam,
        v=v,
        theta=theta,
        value=objective(theta, chain, snr),
        iters=iters,
    )
