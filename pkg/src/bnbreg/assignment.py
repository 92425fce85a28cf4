"""Linear assignment with a fixed number of matches.

A k-cardinality problem on an ``n_x x n_y`` cost matrix is turned into a
square perfect-matching problem of size ``n_x + n_y - k``::

                 real cols (n_y)   dummy cols (n_x - k)
    real rows       costs               0
    dummy rows        0              forbidden
    (n_y - k)

Every real row either takes a real column or a dummy column; forbidding
dummy/dummy pairs forces exactly ``k`` real/real pairs.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .problem import Assignment

__all__ = ["expand_kcard_to_square", "solve_lap", "solve_kcard_lap"]

FORBIDDEN = np.inf


def _check_kcard(costs, n_p):
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if not np.all(np.isfinite(costs)):
        raise ValueError("cost matrix must be finite")
    n_x, n_y = costs.shape
    if int(n_p) != n_p or not 1 <= n_p <= min(n_x, n_y):
        raise ValueError(f"n_p must be an integer in [1, {min(n_x, n_y)}], got {n_p}")
    return costs, int(n_p)


def expand_kcard_to_square(costs, n_p: int) -> np.ndarray:
    costs, n_p = _check_kcard(costs, n_p)
    n_x, n_y = costs.shape
    n = n_x + n_y - n_p
    square = np.zeros((n, n))
    square[:n_x, :n_y] = costs
    square[n_x:, n_y:] = FORBIDDEN
    return square


def solve_lap(costs):
    """Minimum-cost perfect matching of a square cost matrix.

    Returns ``(perm, value)`` with row ``i`` assigned to column ``perm[i]``.
    Entries equal to ``+inf`` are treated as forbidden pairs.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
        raise ValueError("solve_lap needs a square cost matrix")
    if np.any(np.isnan(costs)) or np.any(costs == -np.inf):
        raise ValueError("cost matrix must not contain NaN or -inf")
    rows, cols = linear_sum_assignment(costs)
    perm = np.empty(costs.shape[0], dtype=int)
    perm[rows] = cols
    return perm, float(costs[rows, cols].sum())


def solve_kcard_lap(costs, n_p: int):
    """Pick exactly ``n_p`` row/column-disjoint pairs with minimum total cost.

    Returns ``(Assignment, value)``.
    """
    costs, n_p = _check_kcard(costs, n_p)
    n_x, n_y = costs.shape
    perm, _ = solve_lap(expand_kcard_to_square(costs, n_p))
    P = np.zeros((n_x, n_y))
    real = np.nonzero(perm[:n_x] < n_y)[0]
    P[real, perm[real]] = 1.0
    value = float(costs[real, perm[real]].sum())
    return Assignment(P), value
