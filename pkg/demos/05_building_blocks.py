"""The pieces a node bound is made of, used on their own.

1. A k-cardinality assignment picks exactly k disjoint pairs.
2. A box-constrained convex QP.
3. Interval bounds on theta theta^T over a box.
4. The relaxed energy never exceeds the true energy inside a node.
"""

import numpy as np

from bnbreg import (SIMILARITY2D, BoxQP, build_matrices, compute_fixed_ranges, evaluate_energy,
                    relax_coeffs, solve_box_qp, solve_kcard_lap, theta_box_to_Theta_box)
from bnbreg.relaxation import relaxed_energy

rng = np.random.default_rng(0)

costs = rng.integers(0, 10, size=(4, 5)).astype(float)
assignment, value = solve_kcard_lap(costs, 2)
print("costs\n", costs)
print("two cheapest disjoint pairs:", assignment.pairs.tolist(), "total", value)

Q = np.array([[2.0, 0.5], [0.5, 1.0]])
res = solve_box_qp(BoxQP(Q, np.array([-8.0, 1.0]), np.array([-1.0, -1.0]), np.array([1.0, 1.0])))
print(f"box QP minimiser {res.x}, value {res.value:.4f}, KKT residual {res.kkt:.1e}")

box = theta_box_to_Theta_box([0.5, -1.0], [1.0, 2.0])
print("theta theta^T lies in\n", box.lo, "\n", box.hi)

X = rng.uniform(-1, 1, (5, 2))
Y = rng.uniform(-1, 1, (5, 2))
pm = build_matrices(X, Y, SIMILARITY2D, 3)
ranges = compute_fixed_ranges(pm)
lo, hi = np.array([0.5, -0.5, -0.2, -0.2]), np.array([1.0, 0.0, 0.2, 0.2])
coeffs = relax_coeffs(ranges, lo, hi)
gaps = []
for _ in range(2000):
    P = np.zeros((5, 5))
    P[rng.choice(5, 3, replace=False), rng.choice(5, 3, replace=False)] = 1
    th = rng.uniform(lo, hi)
    gaps.append(evaluate_energy(pm, P.ravel(), th) - relaxed_energy(pm, coeffs, P.ravel(), th))
print(f"true minus relaxed energy over 2000 samples: min {min(gaps):.4f}, mean {np.mean(gaps):.4f}")
