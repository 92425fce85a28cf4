"""End-to-end registration: normalisation, search box defaults and reporting."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bnb import BnbConfig, BnbResult, TraceRecord, minimize
from .problem import build_matrices, check_identifiable
from .relaxation import compute_fixed_ranges
from .transforms import ModelKind, TransformModel, get_model, matrix_to_theta, theta_to_matrix

__all__ = [
    "Normalization",
    "normalize_pair",
    "theta_to_normalized",
    "theta_from_normalized",
    "default_box",
    "box_around",
    "truth_branch_point",
    "resolve_n_p",
    "kabsch",
    "matching_error",
    "MatchReport",
    "register",
]


@dataclass(frozen=True)
class Normalization:
    """``x_n = (x - mean_x) / scale`` and ``y_n = (y - mean_y) / scale``.

    One scale is shared by both sets so rotations stay rotations and
    energies scale by ``scale**2``.
    """

    mean_x: np.ndarray
    mean_y: np.ndarray
    scale: float

    def apply(self, X, Y):
        return (np.asarray(X) - self.mean_x) / self.scale, (np.asarray(Y) - self.mean_y) / self.scale

    @classmethod
    def identity(cls, d: int) -> "Normalization":
        return cls(np.zeros(d), np.zeros(d), 1.0)


def normalize_pair(X, Y) -> Normalization:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    extent = max(np.max(np.abs(X - mx)), np.max(np.abs(Y - my)))
    return Normalization(mx, my, float(extent) if extent > 0 else 1.0)


def theta_to_normalized(model, theta, norm: Normalization) -> np.ndarray:
    model = get_model(model)
    M, t = theta_to_matrix(model, theta)
    return matrix_to_theta(model, M, (M @ norm.mean_x + t - norm.mean_y) / norm.scale)


def theta_from_normalized(model, theta_n, norm: Normalization) -> np.ndarray:
    model = get_model(model)
    M, t = theta_to_matrix(model, theta_n)
    return matrix_to_theta(model, M, norm.scale * t + norm.mean_y - M @ norm.mean_x)


def default_box(model, Xn, Yn):
    """Search box in the normalised frame.

    Linear parameters cover scales up to 1.5; translations cover every
    offset that can put a model point onto a scene point. For rigid models
    the box is ``r in [-pi, pi]^3`` plus the translation range.
    """
    model = get_model(model)
    Xn = np.asarray(Xn)
    Yn = np.asarray(Yn)
    rigid = model.kind is ModelKind.RIGID3D
    # furthest a model point can land from the origin under the linear part
    reach = float(np.max(np.linalg.norm(Xn, axis=1))) * (1.0 if rigid else 1.5)
    t_lo = Yn.min(axis=0) - reach
    t_hi = Yn.max(axis=0) + reach
    pad = 0.05 * (t_hi - t_lo)
    t_lo, t_hi = t_lo - pad, t_hi + pad
    if rigid:
        return np.concatenate([np.full(3, -np.pi), t_lo]), np.concatenate([np.full(3, np.pi), t_hi])
    n_lin = model.theta_dim - model.point_dim
    return np.concatenate([np.full(n_lin, -1.5), t_lo]), np.concatenate([np.full(n_lin, 1.5), t_hi])


def box_around(center, delta):
    center = np.asarray(center, dtype=float)
    return center - delta, center + delta


def truth_branch_point(model, rotation, scale, translation, norm: Normalization,
                       angle_axis=None) -> np.ndarray:
    """Branching-space coordinates of ``y = scale * R x + t`` in the normalised frame.

    Rigid models need ``angle_axis`` (normalisation leaves rotations alone);
    the others use ``theta``.
    """
    model = get_model(model)
    M = scale * np.asarray(rotation, dtype=float)
    t_n = (M @ norm.mean_x + np.asarray(translation, dtype=float) - norm.mean_y) / norm.scale
    if model.kind is ModelKind.RIGID3D:
        if angle_axis is None:
            raise ValueError("rigid models need the angle-axis vector of the rotation")
        return np.concatenate([np.asarray(angle_axis, dtype=float), t_n])
    return matrix_to_theta(model, M, t_n)


def resolve_n_p(n_p, n_x: int, n_y: int) -> int:
    """Absolute match count from an integer or a fraction in ``(0, 1]``."""
    m = min(n_x, n_y)
    if isinstance(n_p, float) and not (n_p > 1 and n_p.is_integer()):
        if not 0 < n_p <= 1:
            raise ValueError(f"fractional n_p must lie in (0, 1], got {n_p}")
        return max(1, int(round(n_p * m)))
    n_p = int(n_p)
    if not 1 <= n_p <= m:
        raise ValueError(f"n_p must lie in [1, {m}], got {n_p}")
    return n_p


def kabsch(A, B):
    """Least-squares rotation and translation with ``B ~ R A + t``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    U, _, Vt = np.linalg.svd((A - ca).T @ (B - cb))
    D = np.eye(A.shape[1])
    D[-1, -1] = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ D @ U.T
    return R, cb - R @ ca


def matching_error(transform, X, Y, pairs) -> float:
    """RMS distance between transformed model inliers and their scene partners.

    ``transform`` maps an ``(n, d)`` array of model points to scene space.
    """
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if len(pairs) == 0:
        return float("nan")
    diff = transform(np.asarray(X)[pairs[:, 0]]) - np.asarray(Y)[pairs[:, 1]]
    return float(np.sqrt(np.mean(np.sum(diff**2, axis=1))))


@dataclass
class MatchReport:
    model: TransformModel
    n_p: int
    pairs: np.ndarray
    theta: np.ndarray
    energy: float
    global_lb: float
    gap: float
    iterations: int
    termination: str
    wall_time: float
    normalization: Normalization
    rotation: np.ndarray | None = None
    translation: np.ndarray | None = None
    trace: list[TraceRecord] = field(default_factory=list)
    psd_clamps: int = 0
    matching_error: float | None = None

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.rotation is not None:
            return X @ self.rotation.T + self.translation
        M, t = theta_to_matrix(self.model, self.theta)
        return X @ M.T + t

    def to_dict(self) -> dict:
        out = {
            "transform": self.model.kind.value,
            "n_p": self.n_p,
            "pairs": self.pairs.tolist(),
            "theta": self.theta.tolist(),
            "energy": self.energy,
            "global_lb": self.global_lb,
            "gap": self.gap,
            "iterations": self.iterations,
            "termination": self.termination,
            "psd_clamps": self.psd_clamps,
            "matching_error": self.matching_error,
            "wall_time": self.wall_time,
        }
        if self.rotation is not None:
            out["rotation"] = self.rotation.tolist()
            out["translation"] = self.translation.tolist()
        return out


def register(X, Y, model, n_p, box=None, epsilon: float = 1e-6, max_depth: int | None = 12,
             grid_resolution: int = 21, grid_margin: float = 0.05, normalize: bool = True,
             max_iterations: int | None = None, time_limit: float | None = None,
             ground_truth_pairs=None) -> MatchReport:
    """Register model ``X`` onto scene ``Y``.

    ``box`` is ``(lo, hi)`` in the branching space of the normalised frame
    (see :func:`default_box`); ``epsilon`` is relative to the mean squared
    norm of the normalised scene. Reported energies and transformations are
    in the original frame.
    """
    start = time.perf_counter()
    model = get_model(model)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n_p = resolve_n_p(n_p, len(X), len(Y))
    norm = normalize_pair(X, Y) if normalize else Normalization.identity(model.point_dim)
    Xn, Yn = norm.apply(X, Y)
    pm = build_matrices(Xn, Yn, model, n_p)
    check_identifiable(pm)
    if box is None:
        box = default_box(model, Xn, Yn)
    eps_abs = epsilon * float(np.mean(np.sum(Yn**2, axis=1)))
    config = BnbConfig(box[0], box[1], epsilon=eps_abs, max_depth=max_depth, max_iterations=max_iterations,
                       time_limit=time_limit,
                       grid_resolution=grid_resolution, grid_margin=grid_margin)
    res: BnbResult = minimize(pm, compute_fixed_ranges(pm), config)
    pairs = res.p_best.pairs
    theta = theta_from_normalized(model, res.theta_best, norm)
    s2 = norm.scale**2
    report = MatchReport(
        model=model, n_p=n_p, pairs=pairs, theta=theta,
        energy=res.e_best * s2, global_lb=res.global_lb * s2, gap=res.gap * s2,
        iterations=res.iterations, termination=res.termination.value,
        wall_time=0.0, normalization=norm, trace=res.trace, psd_clamps=res.psd_clamps,
    )
    if model.kind is ModelKind.RIGID3D:
        report.rotation, report.translation = kabsch(X[pairs[:, 0]], Y[pairs[:, 1]])
    if ground_truth_pairs is not None:
        report.matching_error = matching_error(report.transform, X, Y, ground_truth_pairs)
    report.wall_time = time.perf_counter() - start
    return report
