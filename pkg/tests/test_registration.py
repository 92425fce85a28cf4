import numpy as np
import pytest

from bnbreg.registration import (box_around, default_box, kabsch, matching_error, normalize_pair, register,
                                 resolve_n_p, theta_from_normalized, theta_to_normalized, truth_branch_point)
from bnbreg.synth import fish_2d, helix_3d, synthesize
from bnbreg.transforms import AFFINE2D, RIGID3D, SIMILARITY2D, angle_axis_to_rotation, apply_transform


def test_resolve_n_p():
    assert resolve_n_p(0.9, 98, 127) == 88
    assert resolve_n_p(5, 6, 7) == 5
    assert resolve_n_p(1.0, 6, 7) == 6
    for bad in (0, 7, 1.5, -0.2):
        with pytest.raises(ValueError):
            resolve_n_p(bad, 6, 7)


@pytest.mark.parametrize("model", [SIMILARITY2D, AFFINE2D])
def test_normalised_theta_roundtrip(model, rng):
    X, Y = rng.normal(size=(5, 2)) * 3 + 1, rng.normal(size=(6, 2)) * 2 - 4
    norm = normalize_pair(X, Y)
    theta = rng.normal(size=model.theta_dim)
    tn = theta_to_normalized(model, theta, norm)
    Xn, _ = norm.apply(X, Y)
    # mapping in the normalised frame equals mapping then normalising
    assert np.allclose(apply_transform(model, tn, Xn), (apply_transform(model, theta, X) - norm.mean_y) / norm.scale)
    assert np.allclose(theta_from_normalized(model, tn, norm), theta)


def test_truth_branch_point_rigid(rng):
    r = np.array([0.2, -0.1, 0.4])
    R, t = angle_axis_to_rotation(r), np.array([1.0, 2.0, -1.0])
    X = rng.normal(size=(6, 3))
    Y = X @ R.T + t
    norm = normalize_pair(X, Y)
    c = truth_branch_point(RIGID3D, R, 1.0, t, norm, r)
    Xn, Yn = norm.apply(X, Y)
    assert np.allclose(c[:3], r) and np.allclose(Xn @ R.T + c[3:], Yn)


def test_default_box_contains_truth():
    inst = synthesize(fish_2d(30), "noise", 0.0, seed=1)
    norm = normalize_pair(inst.model, inst.scene)
    lo, hi = default_box(SIMILARITY2D, *norm.apply(inst.model, inst.scene))
    c = truth_branch_point(SIMILARITY2D, inst.truth.rotation, inst.truth.scale, inst.truth.translation, norm)
    assert np.all(lo <= c) and np.all(c <= hi)


def test_kabsch_recovers_rotation(rng):
    R = angle_axis_to_rotation(rng.normal(size=3))
    A = rng.normal(size=(10, 3))
    Rk, tk = kabsch(A, A @ R.T + [1, 2, 3])
    assert np.allclose(Rk, R) and np.allclose(tk, [1, 2, 3])


def test_matching_error_definition():
    X = np.zeros((3, 2))
    Y = np.array([[3.0, 4.0], [0.0, 0.0], [0.0, 0.0]])
    assert matching_error(lambda P: P, X, Y, [[0, 0], [1, 1]]) == pytest.approx(np.sqrt(12.5))


def test_self_registration_is_exact(rng):
    X = rng.normal(size=(8, 2)) * 5 + 3
    rep = register(X, X.copy(), SIMILARITY2D, 8, max_depth=6, ground_truth_pairs=np.column_stack([np.arange(8)] * 2))
    assert rep.matching_error <= 1e-6
    assert rep.energy <= 1e-12 and rep.global_lb <= rep.energy


def test_register_similarity_with_outliers():
    inst = synthesize(fish_2d(24), "separate_outliers", 0.3, seed=11)
    norm = normalize_pair(inst.model, inst.scene)
    t = inst.truth
    c = truth_branch_point(SIMILARITY2D, t.rotation, t.scale, t.translation, norm)
    rep = register(inst.model, inst.scene, SIMILARITY2D, t.n_inliers, box=box_around(c, 0.3),
                   max_depth=10, ground_truth_pairs=t.pairs)
    assert rep.matching_error < 1e-6
    assert rep.to_dict()["termination"] in {"DepthLimit", "GapClosed"}


def test_register_rigid_reports_rotation():
    inst = synthesize(helix_3d(12), "noise", 0.0, seed=2)
    t = inst.truth
    norm = normalize_pair(inst.model, inst.scene)
    c = truth_branch_point(RIGID3D, t.rotation, 1.0, t.translation, norm, t.angle_axis)
    rep = register(inst.model, inst.scene, RIGID3D, t.n_inliers, box=box_around(c, 0.2), max_depth=6,
                   grid_resolution=5, ground_truth_pairs=t.pairs)
    assert np.allclose(rep.rotation, t.rotation, atol=1e-8)
    assert "rotation" in rep.to_dict()
