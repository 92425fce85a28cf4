"""Linear-in-parameter transformation models ``T(x|theta) = J(x) @ theta``.

Four model kinds are supported. ``RIGID3D`` reuses the 3D affine parameter
layout (row-major rotation entries, then translation) so that every
downstream matrix is shared with ``AFFINE3D``; only the branching space
differs (angle-axis plus translation).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelKind",
    "TransformModel",
    "SIMILARITY2D",
    "AFFINE2D",
    "AFFINE3D",
    "RIGID3D",
    "get_model",
    "jacobian",
    "stacked_jacobian",
    "skew",
    "angle_axis_to_rotation",
    "rigid_to_theta",
    "apply_transform",
    "theta_to_matrix",
    "matrix_to_theta",
]

# below this angle the exp map coefficients use their Taylor expansions
_SMALL_ANGLE = 1e-6


class ModelKind(str, enum.Enum):
    SIMILARITY2D = "sim2d"
    AFFINE2D = "aff2d"
    AFFINE3D = "aff3d"
    RIGID3D = "rigid3d"


@dataclass(frozen=True)
class TransformModel:
    kind: ModelKind
    point_dim: int
    theta_dim: int

    @property
    def branch_dim(self) -> int:
        """Dimension of the space the branch-and-bound subdivides."""
        return 6 if self.kind is ModelKind.RIGID3D else self.theta_dim

    @property
    def translation_slots(self) -> np.ndarray:
        return np.arange(self.theta_dim - self.point_dim, self.theta_dim)


SIMILARITY2D = TransformModel(ModelKind.SIMILARITY2D, 2, 4)
AFFINE2D = TransformModel(ModelKind.AFFINE2D, 2, 6)
AFFINE3D = TransformModel(ModelKind.AFFINE3D, 3, 12)
RIGID3D = TransformModel(ModelKind.RIGID3D, 3, 12)

_MODELS = {m.kind: m for m in (SIMILARITY2D, AFFINE2D, AFFINE3D, RIGID3D)}


def get_model(kind) -> TransformModel:
    """Look up a model by :class:`ModelKind` or its string value."""
    if isinstance(kind, TransformModel):
        return kind
    return _MODELS[ModelKind(kind)]


def stacked_jacobian(model: TransformModel, X) -> np.ndarray:
    """Jacobians of all points, shape ``(n, d, n_theta)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.point_dim:
        raise ValueError(
            f"expected points of dimension {model.point_dim}, got array of shape {X.shape}"
        )
    n = X.shape[0]
    J = np.zeros((n, model.point_dim, model.theta_dim))
    if model.kind is ModelKind.SIMILARITY2D:
        x1, x2 = X[:, 0], X[:, 1]
        J[:, 0, 0] = x1
        J[:, 0, 1] = -x2
        J[:, 0, 2] = 1.0
        J[:, 1, 0] = x2
        J[:, 1, 1] = x1
        J[:, 1, 3] = 1.0
    else:
        d = model.point_dim
        for row in range(d):
            J[:, row, row * d:(row + 1) * d] = X
            J[:, row, d * d + row] = 1.0
    return J


def jacobian(model: TransformModel, x) -> np.ndarray:
    """Jacobian ``J(x)`` of a single point, shape ``(d, n_theta)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.point_dim,):
        raise ValueError(f"expected a point of dimension {model.point_dim}, got shape {x.shape}")
    return stacked_jacobian(model, x[None, :])[0]


def skew(r) -> np.ndarray:
    """Cross-product matrix ``[r]_x`` so that ``skew(r) @ v == cross(r, v)``."""
    r1, r2, r3 = np.asarray(r, dtype=float)
    return np.array([[0.0, -r3, r2],
                     [r3, 0.0, -r1],
                     [-r2, r1, 0.0]])


def angle_axis_to_rotation(r) -> np.ndarray:
    """Rotation matrix of an angle-axis vector via the exponential map."""
    r = np.asarray(r, dtype=float)
    K = skew(r)
    a2 = float(r @ r)
    a = np.sqrt(a2)
    if a < _SMALL_ANGLE:
        s = 1.0 - a2 / 6.0
        c = 0.5 - a2 / 24.0
    else:
        s = np.sin(a) / a
        c = (1.0 - np.cos(a)) / a2
    return np.eye(3) + s * K + c * (K @ K)


def angle_axis_to_rotation_batch(r) -> np.ndarray:
    """Vectorised :func:`angle_axis_to_rotation` over an ``(m, 3)`` array."""
    r = np.asarray(r, dtype=float).reshape(-1, 3)
    m = r.shape[0]
    K = np.zeros((m, 3, 3))
    K[:, 0, 1] = -r[:, 2]
    K[:, 0, 2] = r[:, 1]
    K[:, 1, 0] = r[:, 2]
    K[:, 1, 2] = -r[:, 0]
    K[:, 2, 0] = -r[:, 1]
    K[:, 2, 1] = r[:, 0]
    a2 = np.einsum("ij,ij->i", r, r)
    a = np.sqrt(a2)
    small = a < _SMALL_ANGLE
    safe_a = np.where(small, 1.0, a)
    s = np.where(small, 1.0 - a2 / 6.0, np.sin(safe_a) / safe_a)
    c = np.where(small, 0.5 - a2 / 24.0, (1.0 - np.cos(safe_a)) / safe_a**2)
    return np.eye(3) + s[:, None, None] * K + c[:, None, None] * (K @ K)


def rigid_to_theta(r, t) -> np.ndarray:
    """Embed a rigid motion in the 12-parameter affine layout."""
    R = angle_axis_to_rotation(r)
    return np.concatenate([R.ravel(), np.asarray(t, dtype=float)])


def theta_to_matrix(model: TransformModel, theta):
    """Split ``theta`` into ``(M, t)`` with ``T(x) = M @ x + t``."""
    theta = np.asarray(theta, dtype=float)
    if model.kind is ModelKind.SIMILARITY2D:
        a, b, tx, ty = theta
        return np.array([[a, -b], [b, a]]), np.array([tx, ty])
    d = model.point_dim
    return theta[:d * d].reshape(d, d), theta[d * d:].copy()


def matrix_to_theta(model: TransformModel, M, t) -> np.ndarray:
    """Inverse of :func:`theta_to_matrix`.

    For the similarity model only the ``[[a, -b], [b, a]]`` part of ``M`` is
    read; callers pass matrices of that form.
    """
    M = np.asarray(M, dtype=float)
    t = np.asarray(t, dtype=float)
    if model.kind is ModelKind.SIMILARITY2D:
        return np.array([M[0, 0], M[1, 0], t[0], t[1]])
    return np.concatenate([M.ravel(), t])


def apply_transform(model: TransformModel, theta, X) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.theta_dim,):
        raise ValueError(f"theta must have length {model.theta_dim}, got shape {theta.shape}")
    return stacked_jacobian(model, X) @ theta
