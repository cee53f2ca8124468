"""Upper bound and convex lower bound on the miss-probability error exponent.

The lower bound is the minimum over the circulation polytope of

    F(theta) = -sum theta_ij log P_ij + R(theta) - 2 sqrt(R(theta) H(theta)),

solved by Frank-Wolfe. Polytope vertices are uniform flows on simple
cycles, so the linear subproblem is a minimum mean cycle search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cycles import EdgeGraph
from .errors import BoundaryPoint, MaxItersExceeded, SupportViolation
from .markov import SnrProfile, TransitionMatrix, as_snr, entropy_rate, flow_matrix, stationary
from .measure import EdgeMeasure, edge_entropy, relative_entropy, snr_rate

NEWTON_BOUNDARY_FRACTION = 0.5  # Newton steps stop this far toward the nearest empty edge


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8
    max_iters: int = 200_000
    gamma_max: float = 1.0 - 1e-9
    h_floor: float = 1e-14
    ls_tol: float = 1e-13
    # the classic |F(k+1) - F(k)| <= eps test; only fires on complete stagnation
    obj_tol: float = 0.0
    variant: str = "newton"  # or "vanilla"

    def __post_init__(self):
        if not (self.gap_tol > 0 and self.max_iters > 0 and self.h_floor > 0 and self.ls_tol > 0):
            raise ValueError("solver tolerances and iteration cap must be positive")
        if not 0 < self.gamma_max < 1:
            raise ValueError("gamma_max must lie in (0, 1)")
        if self.variant not in ("newton", "vanilla"):
            raise ValueError(f"unknown Frank-Wolfe variant {self.variant!r}")


@dataclass
class BoundResult:
    lower: float
    upper: float
    detectable: bool
    theta_star: EdgeMeasure
    xi_star: np.ndarray
    gap: float
    iters: int
    q_star: np.ndarray
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def certified_lower(self) -> float:
        """``max(0, lower - gap)``: a value the true bound cannot fall below."""
        # the computed gap can dip a hair below zero from round-off
        return max(0.0, self.lower - max(self.gap, 0.0))


def upper_bound(chain: TransitionMatrix, snr) -> float:
    """Perfect-path-knowledge exponent ``sum_i pi_i beta_i^2 / 2``."""
    snr = as_snr(snr, chain.n)
    return float(stationary(chain).pi @ snr.half_sq)


class _Parts:
    """Edge-level pieces of F shared by objective, gradient and line search."""

    __slots__ = ("lin", "r", "h", "log_q")

    def __init__(self, theta: np.ndarray, src, n, log_p, e_half_sq):
        tb = np.bincount(src, weights=theta, minlength=n)
        self.lin = -float(theta @ log_p)
        self.r = float(theta @ e_half_sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_q = np.log(theta) - np.log(tb[src])
        self.log_q = log_q
        pos = theta > 0
        self.h = max(0.0, -float(theta[pos] @ log_q[pos]))


def _check_support(theta: EdgeMeasure, chain: TransitionMatrix) -> np.ndarray:
    if theta.theta.shape == (chain.num_edges,) and (
        theta.src is chain.src or np.array_equal(theta.src, chain.src)
    ) and np.array_equal(theta.dst, chain.dst):
        return theta.theta
    # different edge layout: map onto the chain's edges
    p = chain.p[theta.src, theta.dst]
    if np.any((p <= 0) & (theta.theta > 0)):
        raise SupportViolation("edge measure puts mass on a transition with P_ij = 0")
    return EdgeMeasure.from_dense(theta.dense(), chain.edges).theta


def _parts(values: np.ndarray, chain: TransitionMatrix, snr: SnrProfile) -> _Parts:
    return _Parts(values, chain.src, chain.n, chain.log_edge_p, snr.half_sq[chain.src])


def _value(parts: _Parts, h_floor: float) -> float:
    cross = 0.0 if parts.h < h_floor else 2.0 * math.sqrt(parts.r * parts.h)
    return parts.lin + parts.r - cross


def _grad(parts: _Parts, chain: TransitionMatrix, e_half_sq: np.ndarray, values, h_floor) -> np.ndarray:
    if np.any(values <= 0):
        raise BoundaryPoint("gradient undefined: some edge carries zero mass")
    if parts.h < h_floor:
        raise BoundaryPoint(f"gradient undefined: H(theta) = {parts.h:.3e} below floor")
    if parts.r <= 0:
        raise BoundaryPoint("gradient undefined: R(theta) = 0")
    ratio = math.sqrt(parts.h / parts.r)
    return -chain.log_edge_p + e_half_sq * (1.0 - ratio) + parts.log_q / ratio


def objective(theta: EdgeMeasure, chain: TransitionMatrix, snr, cfg: SolverConfig | None = None) -> float:
    """Convex lower-bound objective F(theta)."""
    cfg = cfg or SolverConfig()
    snr = as_snr(snr, chain.n)
    values = _check_support(theta, chain)
    return _value(_parts(values, chain, snr), cfg.h_floor)


def gradient(theta: EdgeMeasure, chain: TransitionMatrix, snr, cfg: SolverConfig | None = None) -> np.ndarray:
    """Partial derivatives of F on the chain's edges (interior points only)."""
    cfg = cfg or SolverConfig()
    snr = as_snr(snr, chain.n)
    values = _check_support(theta, chain)
    e_half_sq = snr.half_sq[chain.src]
    return _grad(_parts(values, chain, snr), chain, e_half_sq, values, cfg.h_floor)


_GRAPHS: dict[int, tuple[TransitionMatrix, EdgeGraph]] = {}


def _graph(chain: TransitionMatrix) -> EdgeGraph:
    hit = _GRAPHS.get(id(chain))
    if hit is not None and hit[0] is chain:
        return hit[1]
    g = EdgeGraph(chain.n, chain.src, chain.dst)
    if len(_GRAPHS) > 64:
        _GRAPHS.clear()
    _GRAPHS[id(chain)] = (chain, g)
    return g


def lmo(grad, chain: TransitionMatrix) -> EdgeMeasure:
    """Vertex of the circulation polytope minimizing ``<grad, X>``.

    The vertex is the uniform flow on a minimum mean cycle; ties go to
    the shortest cycle, then the lexicographically smallest node sequence.
    """
    vertex, _, _ = lmo_cycle(grad, chain)
    return vertex


def lmo_cycle(grad, chain: TransitionMatrix) -> tuple[EdgeMeasure, tuple[int, ...], float]:
    g = _graph(chain)
    mean, cycle = g.min_mean_cycle(np.asarray(grad, dtype=float))
    x = np.zeros(chain.num_edges)
    x[g.cycle_edges(cycle)] = 1.0 / len(cycle)
    return EdgeMeasure.on_chain(chain, x), cycle, mean


def bisect_derivative(dphi, hi: float, tol: float) -> float:
    """Minimizer on ``[0, hi]`` of a convex function given its derivative."""
    if dphi(0.0) >= 0:
        return 0.0
    if dphi(hi) <= 0:
        return hi
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if dphi(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def line_search(
    theta: EdgeMeasure,
    direction,
    chain: TransitionMatrix,
    snr,
    cfg: SolverConfig | None = None,
    hi: float | None = None,
) -> float:
    """Exact line search along ``direction`` by bisection on the slope.

    The step is searched in ``[0, hi]``, ``hi`` defaulting to ``cfg.gamma_max``.
    """
    cfg = cfg or SolverConfig()
    snr = as_snr(snr, chain.n)
    values = _check_support(theta, chain)
    d = np.asarray(getattr(direction, "theta", direction), dtype=float)
    if not np.any(d):
        return 0.0
    e_half_sq = snr.half_sq[chain.src]

    def dphi(gamma: float) -> float:
        point = values + gamma * d
        try:
            g = _grad(_parts(point, chain, snr), chain, e_half_sq, point, cfg.h_floor)
        except BoundaryPoint:
            return math.inf
        return float(g @ d)

    return bisect_derivative(dphi, cfg.gamma_max if hi is None else hi, cfg.ls_tol)


def recover_xi(theta_star: EdgeMeasure, snr) -> tuple[np.ndarray, float]:
    """Optimal per-node signal sums for a fixed ``theta`` and the inner minimum."""
    snr = as_snr(snr, theta_star.n)
    h = edge_entropy(theta_star)
    r = snr_rate(theta_star, snr)
    if r <= 0:
        return np.zeros(theta_star.n), 0.0
    shrink = min(1.0, h / r)
    xi = theta_star.theta_bar * snr.beta * math.sqrt(shrink)
    inner = r - 2.0 * math.sqrt(r * h) + h if h <= r else 0.0
    return xi, inner


def constraint_slack(theta: EdgeMeasure, xi) -> float:
    """``H(theta) - J_theta(xi)``; ``-inf`` if ``xi`` is nonzero on an unvisited node."""
    xi = np.asarray(xi, dtype=float)
    tb = theta.theta_bar
    if np.any((tb <= 0) & (xi != 0)):
        return -math.inf
    pos = tb > 0
    j = float(np.sum(xi[pos] ** 2 / (2.0 * tb[pos])))
    return edge_entropy(theta) - j


def full_objective(theta: EdgeMeasure, xi, chain: TransitionMatrix, snr) -> float:
    """Two-variable lower-bound objective; ``inf`` outside the feasible set."""
    snr = as_snr(snr, chain.n)
    xi = np.asarray(xi, dtype=float)
    h = edge_entropy(theta)
    slack = constraint_slack(theta, xi)
    if slack < -(1e-12 * max(1.0, h) + 1e-15):
        return math.inf
    tb = theta.theta_bar
    pos = tb > 0
    signal = float(np.sum(tb[pos] * (snr.beta[pos] - xi[pos] / tb[pos]) ** 2) / 2.0)
    return relative_entropy(theta, chain) + signal


def hessian(values: np.ndarray, chain: TransitionMatrix, snr) -> np.ndarray:
    """Dense Hessian of F on the chain's edges at an interior point."""
    snr = as_snr(snr, chain.n)
    values = np.asarray(values, dtype=float)
    parts = _parts(values, chain, snr)
    if np.any(values <= 0) or parts.h <= 0 or parts.r <= 0:
        raise BoundaryPoint("Hessian undefined on the boundary")
    b = snr.half_sq[chain.src]
    dh = -parts.log_q
    tb = np.bincount(chain.src, weights=values, minlength=chain.n)
    s = np.zeros((chain.n, values.size))
    s[chain.src, np.arange(values.size)] = 1.0
    hess_h = (s.T / tb) @ s
    hess_h[np.diag_indices_from(hess_h)] -= 1.0 / values
    g = math.sqrt(parts.r * parts.h)
    dg = (parts.h * b + parts.r * dh) / (2.0 * g)
    inner = np.outer(b, dh)
    inner += inner.T
    inner += parts.r * hess_h - 2.0 * np.outer(dg, dg)
    return -inner / g


def _constraints(chain: TransitionMatrix) -> np.ndarray:
    # conservation at nodes 1..N-1 (node 0 is implied) and total mass
    a = np.zeros((chain.n, chain.num_edges))
    e = np.arange(chain.num_edges)
    np.add.at(a, (chain.src, e), 1.0)
    np.add.at(a, (chain.dst, e), -1.0)
    a[0] = 1.0
    return a


def newton_direction(values, grad, chain: TransitionMatrix, snr) -> np.ndarray | None:
    """Newton step for F restricted to the affine hull of the polytope.

    Returns ``None`` when the KKT system is numerically singular.
    """
    # solve for y = d / values; the raw Hessian carries 1 / theta_e on its
    # diagonal and is badly conditioned near the boundary
    scale = np.asarray(values, dtype=float)
    hess = hessian(values, chain, snr) * scale[:, None] * scale[None, :]
    a = _constraints(chain) * scale[None, :]
    m, n = a.shape
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = hess + 1e-13 * float(np.abs(np.diag(hess)).max()) * np.eye(n)
    kkt[:n, n:] = a.T
    kkt[n:, :n] = a
    rhs = np.concatenate([-grad * scale, np.zeros(m)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    d = sol[:n] * scale
    if not np.all(np.isfinite(d)) or grad @ d >= 0:
        return None
    return d


def _finish(values, f, gap, k, history, chain, snr, theta, converged):
    theta_star = theta.with_values(values)
    xi, _ = recover_xi(theta_star, snr)
    lower = max(0.0, f)
    result = BoundResult(
        lower=lower,
        upper=float(stationary(chain).pi @ snr.half_sq),
        detectable=lower > gap,
        theta_star=theta_star,
        xi_star=xi,
        gap=gap,
        iters=k,
        q_star=theta_star.conditional(),
        history=history,
    )
    if not converged:
        raise MaxItersExceeded(result)
    return result


def frank_wolfe(chain: TransitionMatrix, snr, cfg: SolverConfig | None = None) -> BoundResult:
    """Both error-exponent bounds for ``(chain, snr)``.

    Starts from the stationary flow; when the walk's entropy rate already
    covers the SNR rate there, the lower bound is zero and no iteration runs.
    Otherwise iterates until the Frank-Wolfe duality gap
    ``<grad F(theta), theta - X>`` is at most ``cfg.gap_tol``.

    Each iteration takes the line-searched step toward the LMO vertex. With
    ``cfg.variant == "newton"`` (the default) it then takes a damped Newton
    step within the polytope's affine hull, which turns the slow sublinear
    tail of plain Frank-Wolfe into fast local convergence; ``"vanilla"``
    skips it. Raises :class:`MaxItersExceeded`, carrying the last iterate,
    when the iteration cap is hit first.
    """
    cfg = cfg or SolverConfig()
    snr = as_snr(snr, chain.n)
    pi = stationary(chain).pi
    upper = float(pi @ snr.half_sq)
    theta = EdgeMeasure.on_chain(chain, flow_matrix(chain, pi))

    if entropy_rate(chain) >= upper:
        return BoundResult(
            lower=0.0,
            upper=upper,
            detectable=False,
            theta_star=theta,
            xi_star=pi * snr.beta,
            gap=0.0,
            iters=0,
            q_star=chain.p.copy(),
            history=[],
        )

    e_half_sq = snr.half_sq[chain.src]
    values = theta.theta.copy()
    parts = _parts(values, chain, snr)
    f = _value(parts, cfg.h_floor)
    history = [f]
    gap = math.inf
    for k in range(cfg.max_iters + 1):
        grad = _grad(parts, chain, e_half_sq, values, cfg.h_floor)
        vertex = lmo(grad, chain)
        gap = float(grad @ (values - vertex.theta))
        if gap <= cfg.gap_tol:
            return _finish(values, f, gap, k, history, chain, snr, theta, True)
        if k == cfg.max_iters:
            break
        d = vertex.theta - values
        gamma = line_search(theta.with_values(values), d, chain, snr, cfg)
        values = values + gamma * d
        if cfg.variant == "newton":
            parts = _parts(values, chain, snr)
            grad = _grad(parts, chain, e_half_sq, values, cfg.h_floor)
            d = newton_direction(values, grad, chain, snr)
            if d is not None:
                neg = d < 0
                t_max = float(np.min(-values[neg] / d[neg])) if neg.any() else math.inf
                hi = min(1.0, NEWTON_BOUNDARY_FRACTION * t_max)
                gamma = line_search(theta.with_values(values), d, chain, snr, cfg, hi=hi)
                values = values + gamma * d
        parts = _parts(values, chain, snr)
        f_new = _value(parts, cfg.h_floor)
        history.append(f_new)
        stalled = abs(f_new - f) <= cfg.obj_tol
        f = f_new
        if stalled:
            return _finish(values, f, gap, k + 1, history, chain, snr, theta, True)
    return _finish(values, f, gap, cfg.max_iters, history, chain, snr, theta, False)
