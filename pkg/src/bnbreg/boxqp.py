"""Small dense box-constrained convex QPs: ``min x^T Q x + g^T x, lo <= x <= hi``.

Gradient projection (exact Cauchy point along the projected steepest-descent
path) alternated with a Newton step on the free variables. Dimensions here
are at most 12, so the free-set system is solved directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BoxQP", "QPResult", "project_psd", "solve_box_qp", "kkt_residual"]


@dataclass(frozen=True)
class BoxQP:
    Q: np.ndarray
    g: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x + self.g @ x)


@dataclass(frozen=True)
class QPResult:
    x: np.ndarray
    value: float
    iterations: int
    kkt: float

    def __iter__(self):
        # allows ``x, value = solve_box_qp(...)``
        return iter((self.x, self.value))


def project_psd(Q):
    """Nearest PSD matrix in Frobenius norm, by clamping eigenvalues at zero.

    Returns ``(Q_psd, clamp)`` where ``clamp`` is the magnitude of the most
    negative eigenvalue removed (0.0 when ``Q`` is already PSD, in which
    case ``Q`` is returned unchanged).
    """
    Q = np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    if w[0] >= 0.0:
        return Q, 0.0
    Qp = (V * np.maximum(w, 0.0)) @ V.T
    return 0.5 * (Qp + Qp.T), float(-w[0])


def kkt_residual(Q, g, lo, hi, x) -> float:
    """Infinity norm of the projected gradient, ``x - clip(x - grad)``."""
    grad = 2.0 * Q @ x + g
    return float(np.max(np.abs(x - np.clip(x - grad, lo, hi)), initial=0.0))


def _cauchy_point(Q, g, lo, hi, x):
    """First local minimiser of the quadratic along ``clip(x - t * grad)``."""
    d = -(2.0 * Q @ x + g)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_break = np.where(d < 0, (lo - x) / d, np.where(d > 0, (hi - x) / d, 0.0))
    t_break = np.maximum(t_break, 0.0)
    t_prev = 0.0
    for t_next in np.append(np.unique(t_break[t_break > 0]), np.inf):
        xc = np.clip(x + t_prev * d, lo, hi)
        dseg = np.where(t_break > t_prev, d, 0.0)
        slope = (2.0 * Q @ xc + g) @ dseg
        if slope >= 0.0:
            return xc
        curv = 2.0 * dseg @ Q @ dseg
        if curv > 0.0 and -slope / curv < t_next - t_prev:
            return xc - (slope / curv) * dseg
        t_prev = t_next
    return np.clip(x + t_prev * d, lo, hi)


def _subspace_step(Q, g, lo, hi, x):
    """Newton step on the free variables of ``x`` followed by a projected search."""
    grad = 2.0 * Q @ x + g
    free = ~(((x <= lo) & (grad >= 0)) | ((x >= hi) & (grad <= 0)))
    if not np.any(free):
        return x
    Qf = Q[np.ix_(free, free)]
    rhs = -grad[free]
    try:
        step = np.linalg.solve(2.0 * Qf, rhs)
        if not np.all(np.isfinite(step)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(2.0 * Qf, rhs, rcond=None)[0]
    f0 = x @ Q @ x + g @ x
    alpha = 1.0
    for _ in range(40):
        trial = x.copy()
        trial[free] = np.clip(x[free] + alpha * step, lo[free], hi[free])
        if trial @ Q @ trial + g @ trial <= f0:
            return trial
        alpha *= 0.5
    return x


def _interior_minimiser(Q, g, lo, hi):
    """The unconstrained minimiser when ``Q`` is nonsingular and it lies in the box."""
    try:
        x = np.linalg.solve(2.0 * Q, -g)
    except np.linalg.LinAlgError:
        return None
    if np.all(np.isfinite(x)) and np.all(x >= lo) and np.all(x <= hi):
        if np.allclose(2.0 * Q @ x, -g, rtol=1e-10, atol=1e-12):
            return x
    return None


def solve_box_qp(prob: BoxQP, tol: float = 1e-8, max_iter: int = 500, x0=None) -> QPResult:
    """Global minimiser of a convex box QP.

    Coordinates with ``lo == hi`` are fixed and eliminated first. ``Q`` must
    be PSD; pass it through :func:`project_psd` if that is in doubt.
    """
    Q = 0.5 * (np.asarray(prob.Q, dtype=float) + np.asarray(prob.Q, dtype=float).T)
    g = np.asarray(prob.g, dtype=float)
    lo = np.asarray(prob.lo, dtype=float)
    hi = np.asarray(prob.hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box QP has lo > hi")
    fixed = lo == hi
    x = np.where(fixed, lo, 0.0)
    free = ~fixed
    if np.any(free):
        Qr = Q[np.ix_(free, free)]
        gr = g[free] + 2.0 * Q[np.ix_(free, fixed)] @ x[fixed]
        lr, hr = lo[free], hi[free]
        scale = max(1.0, float(np.max(np.abs(Qr))), float(np.max(np.abs(gr), initial=0.0)))
        interior = _interior_minimiser(Qr, gr, lr, hr)
        if interior is not None:
            x[free] = interior
            return QPResult(x, float(x @ Q @ x + g @ x), 0, kkt_residual(Q, g, lo, hi, x))
        if x0 is None:
            xr = np.clip(0.0, lr, hr)
        else:
            xr = np.clip(np.asarray(x0, dtype=float)[free], lr, hr)
        it = 0
        for it in range(1, max_iter + 1):
            if kkt_residual(Qr, gr, lr, hr, xr) <= tol * scale:
                break
            xc = _cauchy_point(Qr, gr, lr, hr, xr)
            xr = _subspace_step(Qr, gr, lr, hr, xc)
        x[free] = xr
    else:
        it = 0
    return QPResult(x, float(x @ Q @ x + g @ x), it, kkt_residual(Q, g, lo, hi, x))
