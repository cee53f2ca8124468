import numpy as np
import pytest

from rwexponent.errors import InvalidChain
from rwexponent.markov import entropy_rate, stationary, validate

ACCEPTANCE_LINES: list[str] = []


def random_chain(rng, n, density=None):
    """Random irreducible aperiodic chain on n nodes (retries until valid)."""
    while True:
        d = rng.uniform(0.3, 0.9) if density is None else density
        mask = rng.random((n, n)) < d
        w = rng.random((n, n)) * mask
        if np.any(w.sum(axis=1) == 0):
            continue
        try:
            return validate(w / w.sum(axis=1, keepdims=True))
        except InvalidChain:
            continue


def random_detectable(rng, n_max=10):
    """Random chain with an SNR profile above the detectability threshold."""
    while True:
        n = int(rng.integers(2, n_max + 1))
        chain = random_chain(rng, n)
        beta = rng.uniform(0.0, rng.uniform(1.0, 8.0), n)
        if entropy_rate(chain) < stationary(chain).pi @ (0.5 * beta**2):
            return chain, beta


def random_interior(rng, chain):
    """Random strictly positive circulation on the chain's edges.

    The stationary flow of a random chain with the same support.
    """
    w = rng.uniform(0.05, 1.0, chain.num_edges)
    p = np.zeros((chain.n, chain.n))
    p[chain.src, chain.dst] = w
    q = validate(p / p.sum(axis=1, keepdims=True))
    pi = stationary(q).pi
    return pi[q.src] * q.edge_p


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
