import numpy as np
import pytest

from bnbreg.bnb import BnbConfig, BnbNode, Termination, branch, global_lower_bound, minimize
from bnbreg.problem import build_matrices
from bnbreg.transforms import SIMILARITY2D, apply_transform
from oracles import boxed_optimum, similarity_jac


def instance(rng, n=4, k=3, noise=0.05):
    X = rng.normal(size=(n, 2))
    theta = np.array([0.8, 0.3, 0.1, -0.2])
    Y = apply_transform(SIMILARITY2D, theta, X) + noise * rng.normal(size=(n, 2))
    return build_matrices(X, Y, SIMILARITY2D, k), theta


def test_branch_splits_longest_edge():
    node = BnbNode(np.zeros(3), np.array([1.0, 2.0, 2.0]), 4)
    a, b = branch(node)
    assert a.box_hi[1] == 1.0 and b.box_lo[1] == 1.0  # first of the tied longest edges
    assert a.depth == b.depth == 5
    with pytest.raises(ValueError):
        branch(BnbNode(np.ones(2), np.ones(2), 0))


def test_global_lower_bound():
    nodes = [BnbNode(np.zeros(1), np.ones(1), 0, lb) for lb in (3.0, -1.0, 2.0)]
    assert global_lower_bound(nodes) == -1.0


def test_config_validation():
    with pytest.raises(ValueError):
        BnbConfig(np.ones(2), np.zeros(2))
    with pytest.raises(ValueError):
        BnbConfig(np.zeros(2), np.ones(2), max_depth=0)
    with pytest.raises(ValueError):
        BnbConfig(np.zeros(2), np.array([1.0, np.inf]))


def test_box_dimension_checked(rng):
    pm, _ = instance(rng)
    with pytest.raises(ValueError):
        minimize(pm, None, BnbConfig(np.zeros(3), np.ones(3)))


def test_loose_epsilon_closes_gap_near_optimum(rng):
    for _ in range(3):
        pm, theta = instance(rng)
        lo, hi = theta - 0.5, theta + 0.5
        res = minimize(pm, None, BnbConfig(lo, hi, epsilon=2.0, max_depth=None, time_limit=20))
        assert res.termination is Termination.GAP_CLOSED
        opt, _ = boxed_optimum(similarity_jac, pm.X, pm.Y, pm.n_p, lo, hi)
        assert res.global_lb <= opt + 1e-9
        assert res.e_best - opt <= 2.0


def test_bounds_bracket_brute_force_optimum(rng):
    for _ in range(4):
        pm, theta = instance(rng)
        lo, hi = theta - 1.0, theta + 1.0
        res = minimize(pm, None, BnbConfig(lo, hi, epsilon=1e-6, max_depth=10))
        opt, _ = boxed_optimum(similarity_jac, pm.X, pm.Y, pm.n_p, lo, hi)
        # the incumbent is attainable and the lower bound is a certificate
        assert res.global_lb <= opt + 1e-9 <= res.e_best + 2e-9
        assert res.p_best.is_feasible(pm.n_p)
        assert np.all(res.theta_best >= lo - 1e-12) and np.all(res.theta_best <= hi + 1e-12)
        assert pm.residual_energy(res.p_best, res.theta_best) == pytest.approx(res.e_best)


def test_trace_is_monotone_and_sandwiched(rng):
    pm, theta = instance(rng, 6, 4)
    seen = []
    res = minimize(pm, None, BnbConfig(theta - 1, theta + 1, max_depth=8), on_iteration=seen.append)
    assert seen == res.trace
    lbs = np.array([r.global_lb for r in res.trace])
    ubs = np.array([r.e_best for r in res.trace])
    assert np.all(np.diff(lbs) >= -1e-12) and np.all(np.diff(ubs) <= 0) and np.all(lbs <= ubs)
    assert res.global_lb >= lbs[-1] - 1e-12


def test_depth_limit_semantics(rng):
    pm, theta = instance(rng)
    res = minimize(pm, None, BnbConfig(theta - 1, theta + 1, max_depth=3))
    assert res.termination is Termination.DEPTH_LIMIT
    assert res.trace[-1].depth == 4
    assert max(r.depth for r in res.trace[:-1]) <= 3


def test_iteration_and_time_limits(rng):
    pm, theta = instance(rng)
    res = minimize(pm, None, BnbConfig(theta - 1, theta + 1, max_depth=None, max_iterations=5))
    assert res.termination is Termination.ITERATION_LIMIT and res.iterations == 6
    res = minimize(pm, None, BnbConfig(theta - 1, theta + 1, max_depth=None, time_limit=0.2))
    assert res.termination is Termination.TIME_LIMIT


def test_exact_instance_reaches_zero_energy(rng):
    pm, theta = instance(rng, 6, 6, noise=0.0)
    res = minimize(pm, None, BnbConfig(theta - 0.5, theta + 0.5, max_depth=8))
    assert res.e_best < 1e-18
    assert np.allclose(res.theta_best, theta)
    assert res.psd_clamps == 0
