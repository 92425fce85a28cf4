"""Synthetic registration instances with known ground truth.

Each generator starts from a prototype shape, disturbs it into a model and
a scene point set, and finally maps the scene by a random similarity (2D,
scale in ``[0.5, 1.5]``) or rigid (3D) transformation. Scene points are
shuffled so the identity correspondence carries no information.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .transforms import angle_axis_to_rotation

__all__ = [
    "Disturbance",
    "GroundTruth",
    "Instance",
    "fish_2d",
    "helix_3d",
    "normalize_shape",
    "synthesize",
]


class Disturbance(str, enum.Enum):
    DEFORM = "deform"
    NOISE = "noise"
    MIXED_OUTLIERS = "mixed_outliers"
    SEPARATE_OUTLIERS = "separate_outliers"
    OCCLUSION_OUTLIERS = "occlusion_outliers"


OCCLUSION_OUTLIER_RATIO = 0.5


@dataclass(frozen=True)
class GroundTruth:
    """Model-to-scene transformation ``y = scale * R @ x + t`` and inlier pairs."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray
    pairs: np.ndarray
    theta: np.ndarray
    test: str
    level: float
    seed: int | None = None
    angle_axis: np.ndarray | None = None

    @property
    def n_inliers(self) -> int:
        return len(self.pairs)

    def transform(self, X) -> np.ndarray:
        return self.scale * np.asarray(X) @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        out = {
            "rotation": self.rotation.tolist(),
            "scale": self.scale,
            "translation": self.translation.tolist(),
            "theta": self.theta.tolist(),
            "pairs": self.pairs.tolist(),
            "test": self.test,
            "level": self.level,
            "seed": self.seed,
        }
        if self.angle_axis is not None:
            out["angle_axis"] = self.angle_axis.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        aa = d.get("angle_axis")
        return cls(np.array(d["rotation"]), float(d["scale"]), np.array(d["translation"]),
                   np.array(d["pairs"], dtype=int).reshape(-1, 2), np.array(d["theta"]), d["test"],
                   float(d["level"]), d.get("seed"), None if aa is None else np.array(aa))


@dataclass(frozen=True)
class Instance:
    model: np.ndarray
    scene: np.ndarray
    truth: GroundTruth


def normalize_shape(P) -> np.ndarray:
    """Zero mean, unit max-extent (largest absolute centred coordinate)."""
    P = np.asarray(P, dtype=float)
    P = P - P.mean(axis=0)
    return P / np.max(np.abs(P))


def _resample_closed(vertices, n):
    V = np.vstack([vertices, vertices[:1]])
    seg = np.linalg.norm(np.diff(V, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    u = np.linspace(0.0, s[-1], n, endpoint=False)
    return np.column_stack([np.interp(u, s, V[:, k]) for k in range(V.shape[1])])


def fish_2d(n: int = 98) -> np.ndarray:
    """Outline of a fish-like shape (body ellipse with a forked tail)."""
    a = np.linspace(0.0, 2.6, 40)
    upper = np.column_stack([np.cos(a), 0.45 * np.sin(a)])
    lower = upper[::-1] * [1.0, -1.0]
    tail = np.array([[-0.75, 0.0], [-1.15, 0.38], [-1.05, 0.0], [-1.15, -0.38], [-0.75, 0.0]])
    fin = np.array([[0.1, 0.45], [-0.15, 0.62], [-0.3, 0.42]])
    outline = np.vstack([upper[:20], fin, upper[20:], tail[1:-1], lower])
    return normalize_shape(_resample_closed(outline, n))


def helix_3d(n: int = 60) -> np.ndarray:
    """Conical helix with a straight tail: no rotational symmetry."""
    k = int(0.8 * n)
    t = np.linspace(0.0, 3.0 * np.pi, k)
    helix = np.column_stack([(1.0 + 0.3 * t) * np.cos(t), (1.0 + 0.3 * t) * np.sin(t), 0.4 * t])
    s = np.linspace(0.0, 1.0, n - k + 1)[1:]
    tail = helix[-1] + np.outer(s, [-2.0, 1.0, 1.5])
    return normalize_shape(np.vstack([helix, tail]))


def _random_rotation_3d(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    r = axis * rng.uniform(0.0, np.pi)
    return r, angle_axis_to_rotation(r)


def _outliers_in_region(rng, count, center, half):
    d = len(center)
    return center + rng.uniform(-half, half, size=(count, d))


def _rbf_deform(rng, P, level):
    diam = float(np.max(np.linalg.norm(P[:, None] - P[None], axis=2)))
    bw = 0.3 * diam
    centers = P[rng.choice(len(P), 3, replace=False)]
    weights = rng.normal(scale=level, size=(3, P.shape[1]))
    d2 = np.sum((P[:, None, :] - centers[None]) ** 2, axis=2)
    return P + np.exp(-d2 / (2 * bw * bw)) @ weights


def synthesize(prototype, test, level: float, seed: int | None = None,
               noise: float = 0.0, translation_range: float = 0.5) -> Instance:
    """Build a model/scene pair for one disturbance type.

    ``level`` is the deformation amplitude, the noise standard deviation, the
    outlier-to-data ratio, or the occluded fraction, depending on ``test``.
    ``noise`` adds positional noise to scene inliers for any test.
    """
    test = Disturbance(test)
    if not np.isfinite(level) or level < 0:
        raise ValueError(f"level must be a non-negative number, got {level}")
    if test is Disturbance.OCCLUSION_OUTLIERS and level >= 1:
        raise ValueError("occluded fraction must be below 1")
    rng = np.random.default_rng(seed)
    P = normalize_shape(prototype)
    n, d = P.shape
    lo, hi = P.min(axis=0), P.max(axis=0)
    model_in = P.copy()
    scene_in = P.copy()
    keep = np.arange(n)
    model_out = np.empty((0, d))
    scene_out = np.empty((0, d))

    if test is Disturbance.DEFORM:
        scene_in = _rbf_deform(rng, P, level)
    elif test is Disturbance.NOISE:
        scene_in = P + rng.normal(scale=level, size=P.shape)
    elif test is Disturbance.MIXED_OUTLIERS:
        m = int(np.floor(level * n))
        model_out = rng.uniform(lo, hi, size=(m, d))
        scene_out = rng.uniform(lo, hi, size=(m, d))
    elif test is Disturbance.SEPARATE_OUTLIERS:
        m = int(np.floor(level * n))
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        model_out = _outliers_in_region(rng, m, 0.9 * u, 0.4)
        scene_out = _outliers_in_region(rng, m, -0.9 * u, 0.4)
    elif test is Disturbance.OCCLUSION_OUTLIERS:
        n_occ = int(round(level * n))
        seed_pt = P[rng.integers(n)]
        order = np.argsort(np.linalg.norm(P - seed_pt, axis=1))
        keep = np.sort(order[n_occ:])
        scene_in = P[keep]
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        model_out = _outliers_in_region(rng, int(np.floor(OCCLUSION_OUTLIER_RATIO * n)), 0.9 * u, 0.4)
        scene_out = _outliers_in_region(rng, int(np.floor(OCCLUSION_OUTLIER_RATIO * len(keep))), -0.9 * u, 0.4)

    if noise > 0:
        scene_in = scene_in + rng.normal(scale=noise, size=scene_in.shape)

    if d == 2:
        phi = rng.uniform(-np.pi, np.pi)
        s = rng.uniform(0.5, 1.5)
        R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        r = None
    else:
        r, R = _random_rotation_3d(rng)
        s = 1.0
    t = rng.uniform(-translation_range, translation_range, size=d)

    scene = np.vstack([scene_in, scene_out])
    scene = s * scene @ R.T + t
    perm = rng.permutation(len(scene))
    scene = scene[perm]
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    model = np.vstack([model_in, model_out])
    pairs = np.column_stack([keep, inv[: len(keep)]])

    if d == 2:
        theta = np.array([s * np.cos(phi), s * np.sin(phi), t[0], t[1]])
    else:
        theta = np.concatenate([R.ravel(), t])
    truth = GroundTruth(R, float(s), t, pairs, theta, test.value, float(level), seed, r)
    return Instance(model, scene, truth)
