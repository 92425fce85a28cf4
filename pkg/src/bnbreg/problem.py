"""The mixed assignment / least-squares registration energy.

For a correspondence matrix ``P`` (``n_x x n_y``, row-major vectorised to
``p``) and parameters ``theta``::

    E(p, theta) = sum_ij P_ij ||y_j - J(x_i) theta||^2
                = theta^T [mat(K B2 p) + C] theta - 2 theta^T A p + rho^T p

``B2`` keeps only the distinct, point-dependent entries of ``J(x)^T J(x)``;
``K`` scatters them (with sign) back into the ``n_theta x n_theta`` Hessian
and ``C`` collects the entries that are the same for every point, which
contribute ``n_p`` times a constant because ``sum(p) == n_p``.

The dense ``A``/``B2`` matrices have ``n_x * n_y`` columns. They are only
materialised on request; all products with ``p`` go through the compact
per-point factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .transforms import ModelKind, TransformModel, get_model, stacked_jacobian

__all__ = [
    "DegenerateConfigurationError",
    "PointSet",
    "Assignment",
    "B2Layout",
    "ProblemMatrices",
    "b2_row_selection",
    "build_matrices",
    "evaluate_energy",
    "optimal_theta_for_p",
    "concentrated_energy",
    "check_identifiable",
]

# 1-based rows of the full B kept in B2, per model
_B2_ROWS = {
    ModelKind.SIMILARITY2D: [1, 3, 4],
    ModelKind.AFFINE2D: [1, 2, 5, 8, 11],
    ModelKind.AFFINE3D: [1, 2, 3, 10, 14, 15, 22, 27, 34],
    ModelKind.RIGID3D: [1, 2, 3, 10, 14, 15, 22, 27, 34],
}

_COND_LIMIT = 1e12


class DegenerateConfigurationError(RuntimeError):
    """The normal equations for ``theta`` are singular even after ridge."""


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a point set needs at least one point, as an (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


def _as_points(X) -> np.ndarray:
    return X.points if isinstance(X, PointSet) else PointSet(X).points


@dataclass(frozen=True)
class Assignment:
    """A (partial) correspondence matrix; ``P[i, j] = 1`` matches ``x_i`` to ``y_j``."""

    P: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return self.P.ravel()

    @property
    def n_p(self) -> int:
        return int(round(self.P.sum()))

    @property
    def pairs(self) -> np.ndarray:
        """Matched index pairs ``(i, j)``, sorted by model index."""
        return np.argwhere(self.P > 0.5)

    @classmethod
    def from_pairs(cls, pairs, n_x: int, n_y: int) -> "Assignment":
        P = np.zeros((n_x, n_y))
        for i, j in pairs:
            P[i, j] = 1.0
        return cls(P)

    def is_feasible(self, n_p: int | None = None, tol: float = 1e-9) -> bool:
        P = self.P
        ok = (np.all(P >= -tol) and np.all(P.sum(axis=1) <= 1 + tol)
              and np.all(P.sum(axis=0) <= 1 + tol))
        if n_p is not None:
            ok = ok and abs(P.sum() - n_p) <= tol * max(1, n_p)
        return bool(ok)


@dataclass(frozen=True)
class B2Layout:
    """Which entries of ``J^T J`` vary with the point, and how they scatter.

    ``rows`` are 1-based row indices of the full ``B`` (column-major
    ``vec`` of the ``n_theta x n_theta`` Hessian). ``K`` has one row per
    Hessian entry (same ordering) and entries in ``{-1, 0, 1}``.
    ``C_unit`` holds the point-independent entries for a single match.
    """

    rows: list[int]
    entries: list[tuple[int, int]]
    K: np.ndarray
    C_unit: np.ndarray


def _probe_points(d: int) -> np.ndarray:
    # fixed generic points; any point-dependent entry differs across them
    rng = np.random.default_rng(12345)
    return rng.uniform(-2.0, 2.0, size=(7, d))


def b2_row_selection(model) -> B2Layout:
    """Row layout of ``B2`` with the induced ``K`` and per-match ``C``.

    ``K`` and ``C_unit`` are derived by evaluating ``J^T J`` at a few probe
    points and matching every Hessian entry against the listed rows. An
    entry that is neither constant nor (plus or minus) a listed row means
    the row list is wrong for the model, and raises.
    """
    model = get_model(model)
    n = model.theta_dim
    rows = list(_B2_ROWS[model.kind])
    J = stacked_jacobian(model, _probe_points(model.point_dim))
    H = np.einsum("kdi,kdj->kij", J, J)
    # column-major vec: row k of B is entry (k % n, k // n)
    entries = [((r - 1) % n, (r - 1) // n) for r in rows]
    basis = np.array([H[:, a, b] for a, b in entries])
    K = np.zeros((n * n, len(rows)))
    C_unit = np.zeros((n, n))
    for k in range(n * n):
        a, b = k % n, k // n
        v = H[:, a, b]
        if np.allclose(v, v[0], rtol=0, atol=1e-12):
            C_unit[a, b] = v[0]
            continue
        for r, u in enumerate(basis):
            if np.allclose(v, u, rtol=0, atol=1e-12):
                K[k, r] = 1.0
                break
            if np.allclose(v, -u, rtol=0, atol=1e-12):
                K[k, r] = -1.0
                break
        else:
            raise AssertionError(f"Hessian entry {(a, b)} of {model.kind.value} is not covered by B2 rows {rows}")
    return B2Layout(rows, entries, K, C_unit)


@dataclass(frozen=True, eq=False)
class ProblemMatrices:
    """Constants defining ``E(p, theta)`` for one registration instance."""

    model: TransformModel
    X: np.ndarray
    Y: np.ndarray
    n_p: int
    layout: B2Layout
    J: np.ndarray = field(repr=False)
    b2_vals: np.ndarray = field(repr=False)
    ytil: np.ndarray = field(repr=False)

    @property
    def n_x(self) -> int:
        return self.X.shape[0]

    @property
    def n_y(self) -> int:
        return self.Y.shape[0]

    @property
    def theta_dim(self) -> int:
        return self.model.theta_dim

    @property
    def K(self) -> np.ndarray:
        return self.layout.K

    @property
    def C(self) -> np.ndarray:
        return self.n_p * self.layout.C_unit

    @cached_property
    def rho(self) -> np.ndarray:
        return np.tile(self.ytil, self.n_x)

    @cached_property
    def JY(self) -> np.ndarray:
        """``JY[i, j, :] = J(x_i)^T y_j``; the columns of ``A`` as a tensor."""
        return np.einsum("idk,jd->ijk", self.J, self.Y)

    # dense forms, for inspection and small-instance checks

    def dense_A(self) -> np.ndarray:
        return self.JY.reshape(-1, self.theta_dim).T.copy()

    def dense_B2(self) -> np.ndarray:
        return np.repeat(self.b2_vals, self.n_y, axis=1)

    def dense_B(self) -> np.ndarray:
        """Full ``B`` (``n_theta^2`` rows) including constant rows."""
        H = np.einsum("idk,idl->ikl", self.J, self.J)
        cols = H.transpose(0, 2, 1).reshape(self.n_x, -1)  # column-major vec
        return np.repeat(cols.T, self.n_y, axis=1)

    # products with a correspondence

    def as_matrix(self, p) -> np.ndarray:
        if isinstance(p, Assignment):
            return p.P
        p = np.asarray(p, dtype=float)
        return p.reshape(self.n_x, self.n_y)

    def gamma(self, p) -> np.ndarray:
        """``mat(K B2 p)``."""
        s = self.as_matrix(p).sum(axis=1)
        return (self.K @ (self.b2_vals @ s)).reshape(self.theta_dim, self.theta_dim, order="F")

    def hessian(self, p) -> np.ndarray:
        """``mat(K B2 p) + C``; half the Hessian of ``E`` in ``theta``."""
        return self.gamma(p) + self.C

    def A_dot(self, p) -> np.ndarray:
        P = self.as_matrix(p)
        return np.einsum("ij,ijk->k", P, self.JY)

    def rho_dot(self, p) -> float:
        return float(self.as_matrix(p).sum(axis=0) @ self.ytil)

    def linear_cost(self, b2_weights, theta_weights) -> np.ndarray:
        """Cost matrix of ``w^T B2 p - 2 v^T A p + rho^T p`` as ``n_x x n_y``."""
        row = np.asarray(b2_weights) @ self.b2_vals
        return row[:, None] - 2.0 * (self.JY @ np.asarray(theta_weights)) + self.ytil[None, :]

    def residual_energy(self, p, theta) -> float:
        """``sum_ij P_ij ||y_j - J(x_i) theta||^2`` evaluated from residuals."""
        P = self.as_matrix(p)
        T = self.J @ np.asarray(theta, dtype=float)
        rows, cols = np.nonzero(P)
        diff = self.Y[cols] - T[rows]
        return float(P[rows, cols] @ np.einsum("ij,ij->i", diff, diff))


def build_matrices(X, Y, model, n_p: int) -> ProblemMatrices:
    model = get_model(model)
    X = _as_points(X)
    Y = _as_points(Y)
    if X.shape[1] != model.point_dim or Y.shape[1] != model.point_dim:
        raise ValueError(
            f"{model.kind.value} needs {model.point_dim}-D points, got {X.shape[1]}-D and {Y.shape[1]}-D"
        )
    if int(n_p) != n_p or not 1 <= n_p <= min(len(X), len(Y)):
        raise ValueError(f"n_p must be an integer in [1, {min(len(X), len(Y))}], got {n_p}")
    layout = b2_row_selection(model)
    J = stacked_jacobian(model, X)
    H = np.einsum("idk,idl->ikl", J, J)
    b2_vals = np.array([H[:, a, b] for a, b in layout.entries])
    ytil = np.einsum("jd,jd->j", Y, Y)
    for arr in (J, b2_vals, ytil):
        arr.setflags(write=False)
    return ProblemMatrices(model, X, Y, int(n_p), layout, J, b2_vals, ytil)


def evaluate_energy(pm: ProblemMatrices, p, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(theta @ pm.hessian(p) @ theta - 2.0 * theta @ pm.A_dot(p) + pm.rho_dot(p))


def _sym_cond(G) -> float:
    w = np.abs(np.linalg.eigvalsh(G))
    return float(w[-1] / w[0]) if w[0] > 0 else np.inf


def solve_normal_equations(G, b):
    """Solve ``G x = b`` for symmetric PSD ``G``, with ridge on ill-conditioning.

    Returns ``(x, ridged)``.
    """
    n = G.shape[0]
    ridged = False
    if _sym_cond(G) > _COND_LIMIT:
        lam = 1e-9 * np.trace(G) / n
        if not np.isfinite(lam) or lam <= 0:
            raise DegenerateConfigurationError("normal equations have a zero or non-finite matrix")
        G = G + lam * np.eye(n)
        ridged = True
        if _sym_cond(G) > 1e15:
            raise DegenerateConfigurationError("normal equations are singular after ridge regularisation")
    try:
        x = scipy.linalg.solve(G, b, assume_a="pos")
    except np.linalg.LinAlgError:
        x = scipy.linalg.solve(G, b, assume_a="sym")
    return x, ridged


def optimal_theta_for_p(pm: ProblemMatrices, p) -> np.ndarray:
    """Unconstrained minimiser of ``E(p, .)`` for a fixed correspondence."""
    theta, _ = solve_normal_equations(pm.hessian(p), pm.A_dot(p))
    return theta


def concentrated_energy(pm: ProblemMatrices, p) -> float:
    """``E(p) = -p^T A^T [mat(K B2 p) + C]^{-1} A p + rho^T p``.

    Evaluated as the residual energy at the minimiser, which is the same
    quantity without the cancellation between the two terms.
    """
    return pm.residual_energy(p, optimal_theta_for_p(pm, p))


def check_identifiable(pm: ProblemMatrices) -> None:
    """Raise if no correspondence at all can determine ``theta``.

    The normal matrix of any matching is bounded by the one that uses every
    model point, so a rank-deficient full matrix means every solve would
    lean entirely on the ridge (for instance, collinear points under a 2D
    affine model). Rigid models are exempt: planar 3D sets leave the affine
    layout rank-deficient yet fix a rotation, and the ridge covers them.
    """
    if pm.model.kind is ModelKind.RIGID3D:
        return
    H = np.einsum("idk,idl->kl", pm.J, pm.J)
    w = np.linalg.eigvalsh(H)
    if w[0] <= 1e-10 * max(w[-1], 1e-300):
        raise DegenerateConfigurationError(
            f"model points do not determine the {pm.model.kind.value} parameters (rank-deficient design)"
        )
