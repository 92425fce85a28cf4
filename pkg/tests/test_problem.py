import numpy as np
import pytest

from bnbreg.problem import (Assignment, DegenerateConfigurationError, PointSet, b2_row_selection, build_matrices,
                            concentrated_energy, evaluate_energy, optimal_theta_for_p, solve_normal_equations)
from bnbreg.transforms import AFFINE2D, AFFINE3D, RIGID3D, SIMILARITY2D, jacobian
from oracles import all_kcard_matchings, direct_energy, matching_matrix

MODELS = [SIMILARITY2D, AFFINE2D, AFFINE3D, RIGID3D]


def random_partial(rng, n_x, n_y, k):
    rows = rng.choice(n_x, k, replace=False)
    cols = rng.choice(n_y, k, replace=False)
    return matching_matrix(n_x, n_y, rows, cols)


@pytest.mark.parametrize("model", MODELS)
def test_b2_rows_reconstruct_hessian(model, rng):
    lay = b2_row_selection(model)
    n = model.theta_dim
    for _ in range(5):
        x = rng.normal(size=model.point_dim)
        J = jacobian(model, x)
        H = J.T @ J
        b2 = np.array([H[a, b] for a, b in lay.entries])
        rebuilt = (lay.K @ b2).reshape(n, n, order="F") + lay.C_unit
        assert np.allclose(rebuilt, H)


def test_similarity_layout_details():
    lay = b2_row_selection(SIMILARITY2D)
    assert lay.rows == [1, 3, 4]
    assert np.array_equal(lay.C_unit, np.diag([0, 0, 1, 1]))
    # entry (3, 2) (1-based) is -x2, i.e. minus row 4
    assert lay.K[(2 - 1) * 4 + (3 - 1), 2] == -1


@pytest.mark.parametrize("model", MODELS)
def test_energy_matches_direct_sum(model, rng):
    from oracles import affine_jac, similarity_jac
    jac = similarity_jac if model is SIMILARITY2D else affine_jac
    X = rng.normal(size=(5, model.point_dim))
    Y = rng.normal(size=(4, model.point_dim))
    pm = build_matrices(X, Y, model, 3)
    P = random_partial(rng, 5, 4, 3)
    theta = rng.normal(size=model.theta_dim)
    expected = direct_energy(jac, X, Y, P, theta)
    assert np.isclose(evaluate_energy(pm, P.ravel(), theta), expected)
    assert np.isclose(pm.residual_energy(P.ravel(), theta), expected)


def test_dense_matrices_agree_with_compact_products(rng):
    X = rng.normal(size=(4, 2))
    Y = rng.normal(size=(3, 2))
    pm = build_matrices(X, Y, AFFINE2D, 2)
    p = random_partial(rng, 4, 3, 2).ravel()
    assert np.allclose(pm.dense_A() @ p, pm.A_dot(p))
    n = pm.theta_dim
    assert np.allclose((pm.K @ (pm.dense_B2() @ p)).reshape(n, n, order="F"), pm.gamma(p))
    assert np.allclose((pm.dense_B() @ p).reshape(n, n, order="F"), pm.hessian(p))
    assert np.isclose(pm.rho @ p, pm.rho_dot(p))


def test_concentrated_energy_is_minimum_over_theta(rng):
    X = rng.normal(size=(5, 2))
    Y = rng.normal(size=(5, 2))
    pm = build_matrices(X, Y, SIMILARITY2D, 4)
    P = random_partial(rng, 5, 5, 4).ravel()
    th = optimal_theta_for_p(pm, P)
    e = concentrated_energy(pm, P)
    G, b = pm.hessian(P), pm.A_dot(P)
    closed_form = -b @ np.linalg.solve(G, b) + pm.rho_dot(P)
    assert np.isclose(e, closed_form)
    for _ in range(20):
        assert evaluate_energy(pm, P, th + 0.1 * rng.normal(size=4)) >= e - 1e-12


def test_exact_copy_has_zero_energy(rng):
    X = rng.normal(size=(6, 2))
    s, phi, t = 1.2, 0.4, np.array([0.3, -0.2])
    R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    Y = s * X @ R.T + t
    pm = build_matrices(X, Y, SIMILARITY2D, 6)
    P = np.eye(6).ravel()
    assert concentrated_energy(pm, P) < 1e-20
    assert np.allclose(optimal_theta_for_p(pm, P), [s * np.cos(phi), s * np.sin(phi), *t])


def test_vectorisation_is_row_major(rng):
    pm = build_matrices(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)), SIMILARITY2D, 1)
    P = np.zeros((3, 4))
    P[1, 2] = 1
    assert pm.as_matrix(P.ravel())[1, 2] == 1
    assert np.allclose(pm.A_dot(P.ravel()), pm.JY[1, 2])


def test_build_rejects_bad_input(rng):
    X = rng.normal(size=(3, 2))
    with pytest.raises(ValueError):
        build_matrices(X, X, SIMILARITY2D, 4)
    with pytest.raises(ValueError):
        build_matrices(X, rng.normal(size=(3, 3)), SIMILARITY2D, 2)
    with pytest.raises(ValueError):
        PointSet(np.array([[np.nan, 1.0]]))


def test_collinear_affine_is_ridged():
    # collinear points cannot fix a 2D affine map; the ridge keeps theta finite
    X = np.column_stack([np.arange(4.0), 2 * np.arange(4.0)])
    pm = build_matrices(X, X + 1, AFFINE2D, 4)
    p = np.eye(4).ravel()
    theta, ridged = solve_normal_equations(pm.hessian(p), pm.A_dot(p))
    assert ridged and np.all(np.isfinite(theta))
    assert pm.residual_energy(p, theta) < 1e-6


def test_singular_after_ridge_raises():
    with pytest.raises(DegenerateConfigurationError):
        solve_normal_equations(np.zeros((2, 2)), np.ones(2))


def test_ridge_on_ill_conditioned_system():
    G = np.diag([1.0, 1e-13])
    x, ridged = solve_normal_equations(G, np.array([1.0, 0.0]))
    assert ridged and np.allclose(x[0], 1.0, rtol=1e-6)


def test_assignment_helpers():
    a = Assignment.from_pairs([(0, 1), (2, 0)], 3, 2)
    assert a.n_p == 2 and a.is_feasible(2)
    assert a.pairs.tolist() == [[0, 1], [2, 0]]
    assert not Assignment(np.ones((2, 2))).is_feasible()
    assert sum(1 for _ in all_kcard_matchings(3, 3, 2)) == 18


def test_identifiability_check(rng):
    from bnbreg.problem import check_identifiable
    line = np.column_stack([np.arange(5.0), np.arange(5.0)])
    with pytest.raises(DegenerateConfigurationError):
        check_identifiable(build_matrices(line, line, AFFINE2D, 5))
    check_identifiable(build_matrices(line, line, SIMILARITY2D, 5))
    plane = np.column_stack([rng.normal(size=(6, 2)), np.zeros(6)])
    check_identifiable(build_matrices(plane, plane, RIGID3D, 6))
    with pytest.raises(DegenerateConfigurationError):
        check_identifiable(build_matrices(plane, plane, AFFINE3D, 6))
