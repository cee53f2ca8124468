"""Monte-Carlo estimate of the error exponent from the likelihood-ratio product.

Under H0 every observation is standard normal. The likelihood ratio of
the first ``t`` samples is

    L_t = pi' D_1 P D_2 P ... P D_t 1,   D_k = diag(exp(beta x_k - beta^2 / 2)),

and ``-(1/T) log L_T`` converges to the exponent. The product is evaluated
left to right with max-entry rescaling so nothing underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch
from .markov import TransitionMatrix, as_snr, sparsity_radius, stationary
from .typeclass import enumerate_sequences

CHUNK = 4096  # time steps drawn per batch


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int = 100_000
    seed: int = 0
    replicas: int = 4
    checkpoint_every: int = 0  # 0 disables running estimates
    rescale_every: int = 1

    def __post_init__(self):
        if self.horizon < 1 or self.replicas < 1:
            raise ValueError("horizon and replicas must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.checkpoint_every < 0 or self.rescale_every < 1:
            raise ValueError("checkpoint_every must be >= 0 and rescale_every >= 1")


@dataclass
class LrtEstimate:
    zeta_hat: float
    stderr: float
    per_replica: np.ndarray
    # (time, mean over replicas of -(1/time) log L_time) at each checkpoint
    checkpoints: list[tuple[int, float]] = field(default_factory=list)


class _Forward:
    """Running ``log L_t`` for observation columns fed in time order."""

    def __init__(self, chain: TransitionMatrix, beta: np.ndarray, pi: np.ndarray, rescale_every: int):
        self.p = chain.p
        self.beta = beta
        self.half_sq = 0.5 * beta**2
        self.w = pi.copy()
        self.log_scale = 0.0
        self.t = 0
        self.rescale_every = rescale_every

    def feed(self, x: np.ndarray, marks=(), out=None) -> None:
        """Consume columns of ``x`` (N x c); record ``log L`` at absolute times in ``marks``."""
        log_d = self.beta[:, None] * x - self.half_sq[:, None]
        # per-step shift keeps exp() in range; the shift is added back exactly
        shift = log_d.max(axis=0)
        d = np.exp(log_d - shift)
        marks = set(marks)
        w = self.w
        for k in range(x.shape[1]):
            if self.t > 0:
                w = w @ self.p
            w = w * d[:, k]
            self.log_scale += shift[k]
            self.t += 1
            if self.t % self.rescale_every == 0:
                m = w.max()
                w = w / m
                self.log_scale += math.log(m)
            if self.t in marks and out is not None:
                out.append((self.t, self.value_of(w)))
        self.w = w

    def value_of(self, w: np.ndarray) -> float:
        return self.log_scale + math.log(float(w.sum()))

    @property
    def value(self) -> float:
        return self.value_of(self.w)


def log_lrt_product(chain: TransitionMatrix, snr, x, rescale_every: int = 1) -> float:
    """``log L_T`` for one observation matrix ``x`` of shape (N, T).

    With ``beta = 0`` every ``D_k`` is the identity and the result is 0 exactly.
    """
    snr = as_snr(snr, chain.n)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != chain.n:
        raise DimensionMismatch(f"observations must have shape ({chain.n}, T), got {x.shape}")
    if x.shape[1] == 0:
        return 0.0
    if not np.any(snr.beta):
        return 0.0
    fwd = _Forward(chain, snr.beta, stationary(chain).pi, rescale_every)
    fwd.feed(x)
    return fwd.value


def brute_force_log_llr(chain: TransitionMatrix, snr, x, t: int | None = None) -> float:
    """``log L_t`` by summing over every feasible state sequence (small instances only)."""
    snr = as_snr(snr, chain.n)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != chain.n:
        raise DimensionMismatch(f"observations must have shape ({chain.n}, T), got {x.shape}")
    t = x.shape[1] if t is None else int(t)
    if t > x.shape[1]:
        raise DimensionMismatch(f"t = {t} exceeds the {x.shape[1]} observed columns")
    pattern = sparsity_radius(chain)
    seqs = np.array(enumerate_sequences(pattern, t), dtype=np.int64)
    pi = stationary(chain).pi
    log_p = np.log(pi[seqs[:, 0]])
    if t > 1:
        log_p = log_p + np.log(chain.p[seqs[:, :-1], seqs[:, 1:]]).sum(axis=1)
    b = snr.beta[seqs]
    signal = (b * x[seqs, np.arange(t)] - 0.5 * b**2).sum(axis=1)
    return float(logsumexp(log_p + signal))


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Philox stream for one replica; the draw at time ``k`` never depends on batching."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


def _replica(chain, snr, pi, cfg: SimulationConfig, replica: int):
    rng = replica_generator(cfg.seed, replica)
    fwd = _Forward(chain, snr.beta, pi, cfg.rescale_every)
    marks = range(cfg.checkpoint_every, cfg.horizon + 1, cfg.checkpoint_every) if cfg.checkpoint_every else ()
    trace: list[tuple[int, float]] = []
    done = 0
    while done < cfg.horizon:
        c = min(CHUNK, cfg.horizon - done)
        # draw time-major so column k is the same however the horizon is chunked
        x = rng.standard_normal((c, chain.n)).T
        fwd.feed(x, marks, trace)
        done += c
    return -fwd.value / cfg.horizon, [(t, -v / t) for t, v in trace]


def estimate_exponent(chain: TransitionMatrix, snr, cfg: SimulationConfig | None = None) -> LrtEstimate:
    """Mean over replicas of ``-(1/T) log L_T`` with observations drawn under H0."""
    cfg = cfg or SimulationConfig()
    snr = as_snr(snr, chain.n)
    r = cfg.replicas
    if not np.any(snr.beta):
        marks = range(cfg.checkpoint_every, cfg.horizon + 1, cfg.checkpoint_every) if cfg.checkpoint_every else ()
        return LrtEstimate(0.0, 0.0, np.zeros(r), [(t, 0.0) for t in marks])
    pi = stationary(chain).pi
    per = np.empty(r)
    traces = []
    for i in range(r):
        per[i], tr = _replica(chain, snr, pi, cfg, i)
        traces.append(tr)
    stderr = float(np.std(per, ddof=1) / math.sqrt(r)) if r > 1 else 0.0
    checkpoints = []
    for j, (t, _) in enumerate(traces[0]):
        checkpoints.append((t, float(np.mean([tr[j][1] for tr in traces]))))
    return LrtEstimate(float(per.mean()), stderr, per, checkpoints)
