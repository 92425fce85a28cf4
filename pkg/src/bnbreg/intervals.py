"""Interval bounds on ``theta theta^T`` and on rotation-matrix entries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import angle_axis_to_rotation_batch

__all__ = [
    "Interval",
    "IntervalMatrix",
    "interval_mul",
    "interval_square",
    "theta_box_to_Theta_box",
    "RotationGrid",
    "precompute_rotation_grid",
    "rotation_range_from_box",
]


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class IntervalMatrix:
    """Elementwise ``[lo, hi]`` bounds for an array (vector or matrix)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same shape")
        if np.any(lo > hi):
            raise ValueError("lo must not exceed hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, value, tol: float = 0.0) -> bool:
        value = np.asarray(value)
        return bool(np.all(value >= self.lo - tol) and np.all(value <= self.hi + tol))


def interval_mul(a: Interval, b: Interval) -> Interval:
    prods = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(prods), max(prods))


def interval_square(a: Interval) -> Interval:
    lo2, hi2 = a.lo * a.lo, a.hi * a.hi
    if a.lo <= 0.0 <= a.hi:
        return Interval(0.0, max(lo2, hi2))
    return Interval(min(lo2, hi2), max(lo2, hi2))


def theta_box_to_Theta_box(theta_lo, theta_hi) -> IntervalMatrix:
    """Elementwise range of ``Theta = theta theta^T`` over a parameter box.

    Vectorised form of :func:`interval_mul` off the diagonal and
    :func:`interval_square` on it.
    """
    lo = np.asarray(theta_lo, dtype=float)
    hi = np.asarray(theta_hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("theta_lo must not exceed theta_hi")
    prods = np.stack([np.outer(lo, lo), np.outer(lo, hi), np.outer(hi, lo), np.outer(hi, hi)])
    Tlo = prods.min(axis=0)
    Thi = prods.max(axis=0)
    # products are symmetric in (i, j) up to rounding; force exact symmetry
    Tlo = np.minimum(Tlo, Tlo.T)
    Thi = np.maximum(Thi, Thi.T)
    sq_lo = np.where((lo <= 0.0) & (hi >= 0.0), 0.0, np.minimum(lo * lo, hi * hi))
    idx = np.diag_indices_from(Tlo)
    Tlo[idx] = sq_lo
    Thi[idx] = np.maximum(lo * lo, hi * hi)
    return IntervalMatrix(Tlo, Thi)


@dataclass(frozen=True)
class RotationGrid:
    """Rotation matrices sampled on a regular lattice over an angle-axis box.

    ``rotations`` has shape ``(res, res, res, 3, 3)``; axis ``k`` of the
    lattice runs over ``axes[k]``.
    """

    r_lo: np.ndarray
    r_hi: np.ndarray
    resolution: int
    rotations: np.ndarray
    margin: float = 0.05

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(self.r_lo[k], self.r_hi[k], self.resolution) for k in range(3)]

    @property
    def samples(self):
        """Flat ``(r, R)`` arrays of every lattice sample."""
        g = np.meshgrid(*self.axes, indexing="ij")
        r = np.stack([a.ravel() for a in g], axis=1)
        return r, self.rotations.reshape(-1, 3, 3)

    def __len__(self) -> int:
        return self.resolution**3


def precompute_rotation_grid(r_lo, r_hi, resolution: int = 21, margin: float = 0.05) -> RotationGrid:
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    r_lo = np.asarray(r_lo, dtype=float)
    r_hi = np.asarray(r_hi, dtype=float)
    if r_lo.shape != (3,) or r_hi.shape != (3,) or np.any(r_lo > r_hi):
        raise ValueError("rotation box must be two ordered 3-vectors")
    axes = [np.linspace(r_lo[k], r_hi[k], resolution) for k in range(3)]
    g = np.meshgrid(*axes, indexing="ij")
    r = np.stack([a.ravel() for a in g], axis=1)
    R = angle_axis_to_rotation_batch(r).reshape(resolution, resolution, resolution, 3, 3)
    R.setflags(write=False)
    return RotationGrid(r_lo, r_hi, resolution, R, margin)


def _index_range(lo, hi, start, stop, res, tol=1e-12):
    """Lattice indices ``[i0, i1]`` inside ``[lo, hi]``, and the enclosing range."""
    if stop == start:
        return (0, res - 1), (0, res - 1)
    pitch = (stop - start) / (res - 1)
    u_lo = (lo - start) / pitch
    u_hi = (hi - start) / pitch
    inner = (max(int(np.ceil(u_lo - tol)), 0), min(int(np.floor(u_hi + tol)), res - 1))
    outer = (max(int(np.floor(u_lo + tol)), 0), min(int(np.ceil(u_hi - tol)), res - 1))
    return inner, outer


def rotation_range_from_box(grid: RotationGrid, r_lo, r_hi, margin: float | None = None) -> IntervalMatrix:
    """Approximate elementwise range of ``R(r)`` for ``r`` in ``[r_lo, r_hi]``.

    Takes min/max over the lattice samples inside the box; when the box holds
    no sample (it is smaller than the lattice pitch), the samples of the
    enclosing lattice cells are used instead. The result is widened by
    ``margin`` (the grid's default when ``None``) and clipped to ``[-1, 1]``.
    """
    r_lo = np.asarray(r_lo, dtype=float)
    r_hi = np.asarray(r_hi, dtype=float)
    if np.any(r_lo > r_hi):
        raise ValueError("r_lo must not exceed r_hi")
    tol = 1e-9 * max(1.0, float(np.max(np.abs(grid.r_hi - grid.r_lo))))
    if np.any(r_hi < grid.r_lo - tol) or np.any(r_lo > grid.r_hi + tol):
        raise ValueError("rotation box lies outside the precomputed grid")
    inner, outer = [], []
    for k in range(3):
        a, b = _index_range(r_lo[k], r_hi[k], grid.r_lo[k], grid.r_hi[k], grid.resolution)
        inner.append(a)
        outer.append(b)
    ranges = inner if all(i0 <= i1 for i0, i1 in inner) else outer
    block = grid.rotations[
        ranges[0][0]:ranges[0][1] + 1,
        ranges[1][0]:ranges[1][1] + 1,
        ranges[2][0]:ranges[2][1] + 1,
    ].reshape(-1, 3, 3)
    m = grid.margin if margin is None else margin
    lo = np.clip(block.min(axis=0) - m, -1.0, 1.0)
    hi = np.clip(block.max(axis=0) + m, -1.0, 1.0)
    return IntervalMatrix(lo, hi)
