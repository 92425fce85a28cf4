"""Bilinear relaxation of the registration energy and the node bounds.

With ``Gamma = mat(K B2 p)``, ``Theta = theta theta^T`` and
``eta = -2 A p`` the energy reads::

    E = trace(Gamma Theta) + theta^T C theta + theta^T eta + rho^T p

Each product ``Gamma_ij Theta_ij`` and ``theta_i eta_i`` is replaced by the
mean of its two McCormick under-estimators, which is linear in both
factors. ``Gamma`` and ``eta`` ranges are computed once per problem (they
depend on ``p`` only); ``Theta`` ranges follow the branched ``theta`` box.
The relaxed problem then separates into a k-cardinality assignment in
``p`` and a box QP in ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import solve_kcard_lap
from .boxqp import BoxQP, project_psd, solve_box_qp
from .intervals import IntervalMatrix, theta_box_to_Theta_box
from .problem import Assignment, ProblemMatrices, solve_normal_equations

__all__ = [
    "FixedRanges",
    "RelaxCoeffs",
    "NodeBound",
    "compute_eta_range",
    "compute_b2_range",
    "compute_gamma_range",
    "compute_fixed_ranges",
    "relax_coeffs",
    "relaxed_energy",
    "lower_bound_node",
    "upper_bound_from_p",
    "best_theta_for_p",
    "qp_matrix",
    "QPMatrix",
    "PSD_TOL",
]

# smallest eigenvalue of H0 + C below which the QP matrix is clamped
PSD_TOL = -1e-10


@dataclass(frozen=True)
class FixedRanges:
    eta: IntervalMatrix
    gamma: IntervalMatrix


@dataclass(frozen=True)
class RelaxCoeffs:
    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    const_term: float


@dataclass(frozen=True)
class NodeBound:
    lb: float
    p_star: Assignment
    theta_star: np.ndarray
    ub_candidate: float
    theta_ub: np.ndarray
    min_eig: float
    psd_clamp: float


@dataclass(frozen=True)
class QPMatrix:
    """``H0 + C`` after the PSD check; the same for every node of a problem."""

    Q: np.ndarray
    min_eig: float
    clamp: float


def qp_matrix(pm: ProblemMatrices, ranges: FixedRanges) -> QPMatrix:
    Q = ranges.gamma.mid + pm.C
    min_eig = float(np.linalg.eigvalsh(Q)[0])
    clamp = 0.0
    if min_eig < PSD_TOL:
        Q, clamp = project_psd(Q)
    return QPMatrix(Q, min_eig, clamp)


def _kcard_min_max(costs, n_p):
    lo = solve_kcard_lap(costs, n_p)[1]
    hi = -solve_kcard_lap(-costs, n_p)[1]
    return lo, max(lo, hi)


def compute_eta_range(pm: ProblemMatrices) -> IntervalMatrix:
    """Range of ``eta = -2 A p`` over all feasible ``p``, one pair of LAPs per entry."""
    lo = np.empty(pm.theta_dim)
    hi = np.empty(pm.theta_dim)
    for k in range(pm.theta_dim):
        lo[k], hi[k] = _kcard_min_max(-2.0 * pm.JY[:, :, k], pm.n_p)
    return IntervalMatrix(lo, hi)


def compute_b2_range(pm: ProblemMatrices) -> IntervalMatrix:
    """Range of each entry of ``B2 p`` over all feasible ``p``."""
    m = pm.b2_vals.shape[0]
    lo = np.empty(m)
    hi = np.empty(m)
    for r in range(m):
        costs = np.broadcast_to(pm.b2_vals[r][:, None], (pm.n_x, pm.n_y))
        lo[r], hi[r] = _kcard_min_max(costs, pm.n_p)
    return IntervalMatrix(lo, hi)


def compute_gamma_range(pm: ProblemMatrices, b2_range: IntervalMatrix | None = None) -> IntervalMatrix:
    """Range of ``Gamma = mat(K B2 p)``; entries untouched by ``K`` are ``[0, 0]``."""
    if b2_range is None:
        b2_range = compute_b2_range(pm)
    n = pm.theta_dim
    lo = np.zeros(n * n)
    hi = np.zeros(n * n)
    rows, cols = np.nonzero(pm.K)
    sign = pm.K[rows, cols]
    lo[rows] = np.where(sign > 0, b2_range.lo[cols], -b2_range.hi[cols])
    hi[rows] = np.where(sign > 0, b2_range.hi[cols], -b2_range.lo[cols])
    return IntervalMatrix(lo.reshape(n, n, order="F"), hi.reshape(n, n, order="F"))


def compute_fixed_ranges(pm: ProblemMatrices) -> FixedRanges:
    return FixedRanges(compute_eta_range(pm), compute_gamma_range(pm))


def relax_coeffs(ranges: FixedRanges, theta_lo, theta_hi) -> RelaxCoeffs:
    theta_lo = np.asarray(theta_lo, dtype=float)
    theta_hi = np.asarray(theta_hi, dtype=float)
    Th = theta_box_to_Theta_box(theta_lo, theta_hi)
    G, eta = ranges.gamma, ranges.eta
    H0 = G.mid
    H1 = Th.mid
    H2 = -0.5 * (G.lo * Th.lo + G.hi * Th.hi)
    g0 = eta.mid
    g1 = 0.5 * (theta_lo + theta_hi)
    # both averaged under-estimators carry the minus on the constant part
    g2 = -0.5 * (eta.lo * theta_lo + eta.hi * theta_hi)
    return RelaxCoeffs(H0, H1, H2, g0, g1, g2, float(H2.sum() + g2.sum()))


def relaxed_energy(pm: ProblemMatrices, coeffs: RelaxCoeffs, p, theta) -> float:
    """The under-estimator ``E_l(p, theta)`` in its assembled form."""
    theta = np.asarray(theta, dtype=float)
    quad = theta @ (coeffs.H0 + pm.C) @ theta + coeffs.g0 @ theta
    lin = np.sum(coeffs.H1 * pm.gamma(p)) - 2.0 * coeffs.g1 @ pm.A_dot(p) + pm.rho_dot(p)
    return float(quad + lin + coeffs.const_term)


def _assignment_part(pm: ProblemMatrices, coeffs: RelaxCoeffs):
    # trace(H1 mat(K B2 p)) = (K^T vec(H1))^T B2 p
    w = pm.K.T @ coeffs.H1.ravel(order="F")
    return solve_kcard_lap(pm.linear_cost(w, coeffs.g1), pm.n_p)


def upper_bound_from_p(pm: ProblemMatrices, p, theta_lo=None, theta_hi=None) -> float:
    """Energy of a feasible correspondence with its best transformation."""
    return best_theta_for_p(pm, p, theta_lo, theta_hi)[0]


def best_theta_for_p(pm: ProblemMatrices, p, theta_lo=None, theta_hi=None):
    """``(energy, theta)`` for the best transformation of a fixed ``p``.

    The unconstrained minimiser is used when it lies inside
    ``[theta_lo, theta_hi]`` or when no box is given. Otherwise the
    box-constrained least-squares problem is solved, so the value stays
    attainable inside the search box.
    """
    G = pm.hessian(p)
    b = pm.A_dot(p)
    theta, _ = solve_normal_equations(G, b)
    if theta_lo is not None and (np.any(theta < theta_lo) or np.any(theta > theta_hi)):
        theta = solve_box_qp(BoxQP(G, -2.0 * b, np.asarray(theta_lo), np.asarray(theta_hi))).x
    return pm.residual_energy(p, theta), theta


def lower_bound_node(pm: ProblemMatrices, ranges: FixedRanges, theta_lo, theta_hi,
                     ub_box=None, qp: QPMatrix | None = None, ub_cache: dict | None = None) -> NodeBound:
    """Bound ``E`` over ``{p feasible} x [theta_lo, theta_hi]``.

    ``ub_box`` is the ``(lo, hi)`` box the upper-bound transformation must
    respect (the root box during branch and bound). ``qp`` may carry a
    precomputed :func:`qp_matrix`; ``ub_cache`` memoises upper bounds by
    correspondence across calls.
    """
    coeffs = relax_coeffs(ranges, theta_lo, theta_hi)
    p_star, lap_value = _assignment_part(pm, coeffs)
    if qp is None:
        qp = qp_matrix(pm, ranges)
    sol = solve_box_qp(BoxQP(qp.Q, coeffs.g0, np.asarray(theta_lo, float), np.asarray(theta_hi, float)))
    lb = lap_value + sol.value + coeffs.const_term
    key = p_star.pairs.tobytes()
    if ub_cache is not None and key in ub_cache:
        ub, theta_ub = ub_cache[key]
    else:
        ub, theta_ub = best_theta_for_p(pm, p_star, *(ub_box or (None, None)))
        if ub_cache is not None:
            ub_cache[key] = (ub, theta_ub)
    return NodeBound(lb, p_star, sol.x, ub, theta_ub, qp.min_eig, qp.clamp)
