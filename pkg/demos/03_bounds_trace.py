"""Watch the bounds during a search and compare initial box sizes.

The incumbent (best energy found) only goes down and the global lower bound
only goes up. With a depth limit the search stops before the two meet, and
a smaller starting box leaves a smaller residual gap.
"""

import numpy as np

from bnbreg import SIMILARITY2D, box_around, normalize_pair, register, truth_branch_point
from bnbreg.synth import fish_2d, synthesize

inst = synthesize(fish_2d(14), "separate_outliers", 0.3, seed=1)
t = inst.truth
norm = normalize_pair(inst.model, inst.scene)
center = truth_branch_point(SIMILARITY2D, t.rotation, t.scale, t.translation, norm)

for delta in (0.5, 1.0, 1.5):
    rep = register(inst.model, inst.scene, SIMILARITY2D, t.n_inliers, box=box_around(center, delta), max_depth=12)
    lb = np.array([r.global_lb for r in rep.trace])
    ub = np.array([r.e_best for r in rep.trace])
    print(f"box half-width {delta}: {len(rep.trace)} iterations, final gap {rep.gap:.3g}")
    for k in np.linspace(0, len(lb) - 1, 5).astype(int):
        print(f"    iteration {k + 1:5d}  lower {lb[k] * norm.scale**2:10.4f}  best {ub[k] * norm.scale**2:.4g}")
    assert np.all(np.diff(lb) >= 0) and np.all(np.diff(ub) <= 0) and np.all(lb <= ub)
