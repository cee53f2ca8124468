"""Error-exponent bounds for detecting a random walk from noisy node observations."""

from .alpha import AlphaSolution, solve_alpha, theta_of_alpha
from .bounds import BoundResult, SolverConfig, frank_wolfe, objective, upper_bound
from .markov import (
    SnrProfile,
    TransitionMatrix,
    entropy_rate,
    make_alternating_snr,
    make_chain,
    make_ring,
    make_star,
    sparsity_radius,
    stationary,
    validate,
)
from .measure import EdgeMeasure, edge_entropy, relative_entropy, snr_rate
from .montecarlo import LrtEstimate, SimulationConfig, estimate_exponent, log_lrt_product

__version__ = "0.1.0"

__all__ = [
    "AlphaSolution",
    "BoundResult",
    "EdgeMeasure",
    "LrtEstimate",
    "SimulationConfig",
    "SnrProfile",
    "SolverConfig",
    "TransitionMatrix",
    "edge_entropy",
    "entropy_rate",
    "estimate_exponent",
    "frank_wolfe",
    "log_lrt_product",
    "make_alternating_snr",
    "make_chain",
    "make_ring",
    "make_star",
    "objective",
    "relative_entropy",
    "snr_rate",
    "solve_alpha",
    "sparsity_radius",
    "stationary",
    "theta_of_alpha",
    "upper_bound",
    "validate",
]
