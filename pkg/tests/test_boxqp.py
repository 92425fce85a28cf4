import numpy as np
import pytest

from bnbreg.boxqp import BoxQP, kkt_residual, project_psd, solve_box_qp
from oracles import box_qp_by_faces, random_psd


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_matches_face_enumeration(n, rng):
    for _ in range(15):
        Q = random_psd(rng, n, rank=rng.integers(1, n + 1))
        g = rng.normal(scale=3, size=n)
        lo = rng.uniform(-2, 0, size=n)
        hi = lo + rng.uniform(0, 2, size=n)
        res = solve_box_qp(BoxQP(Q, g, lo, hi))
        assert np.all(res.x >= lo) and np.all(res.x <= hi)
        assert abs(res.value - box_qp_by_faces(Q, g, lo, hi)) <= 1e-8 * max(1, abs(res.value))


def test_twelve_dims_kkt(rng):
    for _ in range(10):
        Q = random_psd(rng, 12)
        g = rng.normal(size=12)
        lo, hi = -np.ones(12), np.ones(12)
        res = solve_box_qp(BoxQP(Q, g, lo, hi))
        assert res.kkt <= 1e-8 * max(1, np.abs(Q).max(), np.abs(g).max())


def test_unconstrained_interior_minimum():
    Q = np.diag([1.0, 2.0])
    g = np.array([-2.0, -4.0])
    x, value = solve_box_qp(BoxQP(Q, g, -10 * np.ones(2), 10 * np.ones(2)))
    assert np.allclose(x, [1.0, 1.0]) and np.isclose(value, -3.0)


def test_fixed_coordinates_are_eliminated():
    Q = np.eye(3)
    res = solve_box_qp(BoxQP(Q, np.array([-2.0, 0.0, 0.0]), np.array([-5.0, 0.5, -1.0]), np.array([5.0, 0.5, 1.0])))
    assert np.allclose(res.x, [1.0, 0.5, 0.0])


def test_zero_matrix_is_linear_program(rng):
    g = rng.normal(size=4)
    res = solve_box_qp(BoxQP(np.zeros((4, 4)), g, -np.ones(4), np.ones(4)))
    assert np.allclose(res.x, -np.sign(g))


def test_rejects_empty_box():
    with pytest.raises(ValueError):
        solve_box_qp(BoxQP(np.eye(1), np.zeros(1), np.ones(1), np.zeros(1)))


def test_project_psd(rng):
    A = rng.normal(size=(4, 4))
    A = A + A.T
    P, clamp = project_psd(A)
    assert np.linalg.eigvalsh(P).min() >= -1e-12
    assert clamp == pytest.approx(-np.linalg.eigvalsh(A).min())
    S = random_psd(rng, 3)
    assert project_psd(S)[1] == 0.0


def test_kkt_residual_zero_at_bound_optimum():
    assert kkt_residual(np.eye(1), np.array([4.0]), np.array([0.0]), np.array([1.0]), np.array([0.0])) == 0.0
