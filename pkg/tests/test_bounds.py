import math

import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import random_chain, random_detectable, random_interior
from rwexponent import (
    SolverConfig,
    entropy_rate,
    frank_wolfe,
    make_alternating_snr,
    make_ring,
    make_star,
    objective,
    solve_alpha,
    upper_bound,
    validate,
)
from rwexponent.bounds import (
    bisect_derivative,
    constraint_slack,
    full_objective,
    gradient,
    hessian,
    line_search,
    newton_direction,
    recover_xi,
)
from rwexponent.errors import BoundaryPoint, MaxItersExceeded, SupportViolation
from rwexponent.markov import flow_matrix, stationary
from rwexponent.measure import EdgeMeasure, edge_entropy, relative_entropy, snr_rate


def stationary_flow(chain):
    return EdgeMeasure.on_chain(chain, flow_matrix(chain))


def test_upper_bound_examples():
    assert upper_bound(make_ring(50), np.zeros(50)) == 0.0
    assert abs(upper_bound(make_ring(50), np.ones(50)) - 0.5) <= 1e-15
    star = make_star(51)
    value = upper_bound(star, make_alternating_snr(51, 1.0, 2.0, "star"))
    assert abs(value - 454 / 302) <= 1e-14


def test_objective_at_stationary_flow_is_square_gap():
    rng = np.random.default_rng(11)
    for _ in range(20):
        chain, beta = random_detectable(rng, 8)
        theta = stationary_flow(chain)
        r = upper_bound(chain, beta)
        h = entropy_rate(chain)
        assert abs(objective(theta, chain, beta) - (math.sqrt(r) - math.sqrt(h)) ** 2) <= 1e-12


def test_objective_zero_snr_is_entropy_rate():
    chain = random_chain(np.random.default_rng(12), 7)
    assert abs(objective(stationary_flow(chain), chain, np.zeros(7)) - entropy_rate(chain)) <= 1e-14


def test_objective_single_cycle_guard():
    chain = validate(np.full((3, 3), 1 / 3))
    dense = np.zeros((3, 3))
    dense[0, 1] = dense[1, 2] = dense[2, 0] = 1 / 3
    theta = EdgeMeasure.from_dense(dense, chain.edges)
    beta = np.array([1.0, 2.0, 3.0])
    expected = math.log(3) + (1 + 4 + 9) / 6
    assert abs(objective(theta, chain, beta) - expected) <= 1e-14
    with pytest.raises(BoundaryPoint):
        gradient(theta, chain, beta)


def test_objective_support_violation():
    chain = make_ring(5)
    dense = np.zeros((5, 5))
    dense[0, 2] = dense[2, 0] = 0.5
    with pytest.raises(SupportViolation):
        objective(EdgeMeasure.from_dense(dense), chain, np.ones(5))


def test_gradient_single_self_loop_is_boundary():
    chain = validate([[1.0]])
    with pytest.raises(BoundaryPoint):
        gradient(stationary_flow(chain), chain, [2.0])


def test_gradient_constant_snr_at_stationary_flow():
    rng = np.random.default_rng(13)
    chain = random_chain(rng, 6)
    beta = np.full(6, 2.5)
    g = gradient(stationary_flow(chain), chain, beta)
    # Q = P here, so g is affine in log P with slope sqrt(R/H) - 1
    slope = math.sqrt(upper_bound(chain, beta) / entropy_rate(chain)) - 1.0
    assert np.ptp(g - slope * chain.log_edge_p) <= 1e-12


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(14)
    for _ in range(20):
        chain, beta = random_detectable(rng, 6)
        theta = EdgeMeasure.on_chain(chain, random_interior(rng, chain))
        g = gradient(theta, chain, beta)
        fd = np.empty_like(g)
        for e in range(g.size):
            step = np.zeros_like(g)
            step[e] = 1e-6
            up = objective(theta.with_values(theta.theta + step), chain, beta)
            dn = objective(theta.with_values(theta.theta - step), chain, beta)
            fd[e] = (up - dn) / 2e-6
        assert np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1.0)) <= 1e-6


def test_hessian_matches_finite_differences():
    rng = np.random.default_rng(15)
    chain, beta = random_detectable(rng, 5)
    values = random_interior(rng, chain)
    theta = EdgeMeasure.on_chain(chain, values)
    hess = hessian(values, chain, beta)
    fd = np.empty_like(hess)
    for e in range(values.size):
        step = np.zeros_like(values)
        step[e] = 1e-6
        up = gradient(theta.with_values(values + step), chain, beta)
        dn = gradient(theta.with_values(values - step), chain, beta)
        fd[:, e] = (up - dn) / 2e-6
    assert np.max(np.abs(fd - hess)) <= 1e-5 * max(1.0, np.abs(hess).max())


def test_newton_direction_stays_in_affine_hull():
    rng = np.random.default_rng(16)
    chain, beta = random_detectable(rng, 8)
    values = random_interior(rng, chain)
    g = gradient(EdgeMeasure.on_chain(chain, values), chain, beta)
    d = newton_direction(values, g, chain, beta)
    assert d is not None and g @ d < 0
    assert abs(d.sum()) <= 1e-12
    net = np.bincount(chain.src, weights=d, minlength=chain.n) - np.bincount(chain.dst, weights=d, minlength=chain.n)
    assert np.max(np.abs(net)) <= 1e-12


def test_objective_convex_on_random_segments():
    rng = np.random.default_rng(17)
    worst = -math.inf
    for _ in range(50):
        chain, beta = random_detectable(rng, 8)
        for _ in range(20):
            a = EdgeMeasure.on_chain(chain, random_interior(rng, chain))
            b = a.with_values(random_interior(rng, chain))
            m = a.with_values(0.5 * (a.theta + b.theta))
            fa, fb, fm = (objective(x, chain, beta) for x in (a, b, m))
            worst = max(worst, fm - 0.5 * (fa + fb))
    assert worst <= 1e-10


def test_bisect_derivative_quadratic():
    target = 0.37211
    assert abs(bisect_derivative(lambda g: 2.0 * (g - target), 1.0, 1e-13) - target) <= 1e-10
    # minimizer past the cap is clamped
    cap = SolverConfig().gamma_max
    assert bisect_derivative(lambda g: g - 3.0, cap, 1e-13) == cap
    assert bisect_derivative(lambda g: g + 1.0, cap, 1e-13) == 0.0


def test_line_search_zero_direction():
    chain = make_ring(6)
    theta = stationary_flow(chain)
    assert line_search(theta, np.zeros(chain.num_edges), chain, np.ones(6)) == 0.0


def test_line_search_minimizes_along_segment():
    rng = np.random.default_rng(18)
    chain, beta = random_detectable(rng, 6)
    theta = EdgeMeasure.on_chain(chain, random_interior(rng, chain))
    target = random_interior(rng, chain)
    d = target - theta.theta
    gamma = line_search(theta, d, chain, beta)
    grid = np.linspace(0.0, 1.0 - 1e-9, 2001)
    vals = [objective(theta.with_values(theta.theta + g * d), chain, beta) for g in grid]
    best = objective(theta.with_values(theta.theta + gamma * d), chain, beta)
    assert best <= min(vals) + 1e-12


def test_recover_xi_unconstrained_case():
    chain = make_ring(10)
    theta = stationary_flow(chain)
    beta = np.full(10, 0.5)  # R = 0.125 < H = log 3
    xi, inner = recover_xi(theta, beta)
    np.testing.assert_allclose(xi, theta.theta_bar * beta)
    assert inner == 0.0
    xi, inner = recover_xi(theta, np.zeros(10))
    np.testing.assert_array_equal(xi, 0.0)
    assert inner == 0.0


def test_recover_xi_against_numeric_inner_minimum():
    rng = np.random.default_rng(19)
    checked = 0
    for _ in range(10):
        chain, beta = random_detectable(rng, 6)
        theta = EdgeMeasure.on_chain(chain, random_interior(rng, chain))
        if edge_entropy(theta) >= snr_rate(theta, beta):
            continue
        xi, inner = recover_xi(theta, beta)
        tb = theta.theta_bar
        h = edge_entropy(theta)

        def signal(z):
            return float(np.sum(tb * (beta - z / tb) ** 2) / 2.0)

        res = minimize(
            signal,
            0.5 * tb * beta,
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": lambda z: h - np.sum(z**2 / (2 * tb))}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        assert abs(res.fun - inner) <= 1e-7
        assert abs(full_objective(theta, xi, chain, beta) - (relative_entropy(theta, chain) + inner)) <= 1e-12
        checked += 1
    assert checked >= 3


def test_full_objective_examples():
    chain = make_ring(10)
    pi = stationary(chain).pi
    theta = stationary_flow(chain)
    beta = np.full(10, 0.5)
    assert abs(full_objective(theta, pi * beta, chain, beta)) <= 1e-15
    assert full_objective(theta, pi * 10.0, chain, beta) == math.inf
    assert constraint_slack(theta, np.zeros(10)) == pytest.approx(math.log(3))


def test_full_objective_equals_reformulation():
    rng = np.random.default_rng(20)
    checked = 0
    for _ in range(40):
        chain, beta = random_detectable(rng, 8)
        theta = EdgeMeasure.on_chain(chain, random_interior(rng, chain))
        if edge_entropy(theta) > snr_rate(theta, beta):
            continue
        xi, _ = recover_xi(theta, beta)
        assert abs(full_objective(theta, xi, chain, beta) - objective(theta, chain, beta)) <= 1e-12
        checked += 1
    assert checked >= 10


def test_frank_wolfe_below_threshold():
    res = frank_wolfe(make_ring(50), make_alternating_snr(50, 1.0, 1.5, "ring"))
    assert res.lower <= 1e-7 and not res.detectable
    assert res.iters == 0 and res.gap == 0.0


def test_frank_wolfe_zero_snr():
    res = frank_wolfe(make_ring(50), np.zeros(50))
    assert res.lower == 0.0 and res.upper == 0.0
    np.testing.assert_array_equal(res.xi_star, 0.0)


def test_frank_wolfe_ring_four():
    chain = make_ring(50)
    snr = make_alternating_snr(50, 1.0, 4.0, "ring")
    res = frank_wolfe(chain, snr)
    assert res.detectable and 0 < res.lower <= res.upper
    assert res.gap <= SolverConfig().gap_tol
    # frozen from this solver; agrees with the independent alpha path
    assert abs(res.lower - 0.626770) <= 1e-5
    np.testing.assert_allclose(res.q_star.sum(axis=1), 1.0, atol=1e-12)
    theta = res.theta_star.dense()
    assert abs(theta.sum() - 1) <= 1e-12
    np.testing.assert_allclose(theta.sum(axis=0), theta.sum(axis=1), atol=1e-12)


def test_gap_certifies_against_alpha_value():
    rng = np.random.default_rng(21)
    for _ in range(10):
        chain, beta = random_detectable(rng, 8)
        res = frank_wolfe(chain, beta)
        truth = solve_alpha(chain, beta).value
        assert -1e-10 <= res.lower - truth <= max(res.gap, 0.0) + 1e-10
        assert res.certified_lower <= truth + 1e-10


def test_max_iters_carries_result():
    chain = make_ring(50)
    snr = make_alternating_snr(50, 1.0, 4.0, "ring")
    with pytest.raises(MaxItersExceeded) as err:
        frank_wolfe(chain, snr, SolverConfig(max_iters=3, variant="vanilla"))
    res = err.value.result
    assert res.iters == 3 and res.gap > SolverConfig().gap_tol
    assert len(res.history) == 4
    assert np.all(np.diff(res.history) <= 1e-12)


def test_vanilla_and_newton_agree_loosely():
    chain = make_ring(10)
    snr = make_alternating_snr(10, 1.0, 4.0, "ring")
    fast = frank_wolfe(chain, snr)
    slow = frank_wolfe(chain, snr, SolverConfig(variant="vanilla", gap_tol=1e-4))
    assert 0.0 <= slow.lower - fast.lower <= slow.gap + 1e-12


def test_equal_snr_reduction():
    rng = np.random.default_rng(22)
    for _ in range(10):
        chain = random_chain(rng, int(rng.integers(2, 9)))
        h = entropy_rate(chain)
        below = frank_wolfe(chain, np.full(chain.n, math.sqrt(2 * h * 0.95)))
        above = frank_wolfe(chain, np.full(chain.n, math.sqrt(2 * h * 1.05)))
        assert below.lower == 0.0 and not below.detectable
        assert above.lower > above.gap and above.detectable


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(gamma_max=1.0)
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(variant="pairwise")


def test_ordering_on_random_instances():
    rng = np.random.default_rng(23)
    for _ in range(20):
        chain = random_chain(rng, int(rng.integers(2, 9)))
        beta = rng.uniform(0, 5, chain.n)
        res = frank_wolfe(chain, beta)
        assert 0.0 <= res.lower <= res.upper
