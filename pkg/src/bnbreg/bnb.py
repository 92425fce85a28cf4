"""Best-first branch and bound over the transformation parameters."""

from __future__ import annotations

import enum
import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .intervals import RotationGrid, precompute_rotation_grid, rotation_range_from_box
from .problem import Assignment, ProblemMatrices
from .relaxation import FixedRanges, NodeBound, compute_fixed_ranges, lower_bound_node, qp_matrix
from .transforms import ModelKind

__all__ = [
    "Termination",
    "BnbConfig",
    "BnbNode",
    "TraceRecord",
    "BnbResult",
    "branch",
    "global_lower_bound",
    "branch_box_to_theta_box",
    "minimize",
]


class Termination(str, enum.Enum):
    GAP_CLOSED = "GapClosed"
    DEPTH_LIMIT = "DepthLimit"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"


@dataclass
class BnbConfig:
    """Search settings.

    ``box_lo``/``box_hi`` span the branching space: ``theta`` for similarity
    and affine models, ``(r, t)`` (angle-axis then translation) for rigid.
    ``epsilon`` is absolute. ``max_depth=None`` disables the depth limit;
    ``max_iterations`` and ``time_limit`` (seconds) are optional safety caps.
    """

    box_lo: np.ndarray
    box_hi: np.ndarray
    epsilon: float = 1e-6
    max_depth: int | None = 12
    max_iterations: int | None = None
    time_limit: float | None = None
    grid_resolution: int = 21
    grid_margin: float = 0.05
    rotation_grid: RotationGrid | None = None

    def __post_init__(self):
        self.box_lo = np.asarray(self.box_lo, dtype=float)
        self.box_hi = np.asarray(self.box_hi, dtype=float)
        if self.box_lo.shape != self.box_hi.shape or self.box_lo.ndim != 1:
            raise ValueError("box_lo and box_hi must be vectors of equal length")
        if np.any(self.box_lo > self.box_hi) or not np.all(np.isfinite(self.box_lo + self.box_hi)):
            raise ValueError("initial box is empty or unbounded")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@dataclass
class BnbNode:
    box_lo: np.ndarray
    box_hi: np.ndarray
    depth: int
    lb: float = -np.inf
    p_star: Assignment | None = None
    theta_star: np.ndarray | None = None


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    global_lb: float
    e_best: float
    active: int
    depth: int


@dataclass
class BnbResult:
    p_best: Assignment
    theta_best: np.ndarray
    e_best: float
    global_lb: float
    iterations: int
    termination: Termination
    trace: list[TraceRecord] = field(default_factory=list)
    nodes_bounded: int = 0
    psd_clamps: int = 0
    min_eig: float = np.inf

    @property
    def gap(self) -> float:
        return self.e_best - self.global_lb


def branch(node: BnbNode) -> tuple[BnbNode, BnbNode]:
    """Bisect the longest edge (lowest index on ties)."""
    width = node.box_hi - node.box_lo
    k = int(np.argmax(width))
    if width[k] <= 0:
        raise ValueError("cannot branch a degenerate box")
    mid = 0.5 * (node.box_lo[k] + node.box_hi[k])
    hi1 = node.box_hi.copy()
    hi1[k] = mid
    lo2 = node.box_lo.copy()
    lo2[k] = mid
    return (BnbNode(node.box_lo.copy(), hi1, node.depth + 1),
            BnbNode(lo2, node.box_hi.copy(), node.depth + 1))


def global_lower_bound(nodes) -> float:
    return min(n.lb for n in nodes)


def branch_box_to_theta_box(pm: ProblemMatrices, box_lo, box_hi, grid: RotationGrid | None = None):
    """Map a branching box to a ``theta`` box (identity except for rigid)."""
    if pm.model.kind is not ModelKind.RIGID3D:
        return box_lo, box_hi
    R = rotation_range_from_box(grid, box_lo[:3], box_hi[:3])
    return (np.concatenate([R.lo.ravel(), box_lo[3:]]),
            np.concatenate([R.hi.ravel(), box_hi[3:]]))


def minimize(pm: ProblemMatrices, ranges: FixedRanges | None = None, config: BnbConfig | None = None,
             on_iteration: Callable[[TraceRecord], None] | None = None) -> BnbResult:
    """Globally minimise ``E(p, theta)`` over feasible ``p`` and the config box.

    Each iteration selects the active node with the lowest bound, splits
    it and bounds both children; the incumbent is the best upper bound seen
    at any bounded node. The run stops when no node can beat the incumbent
    by more than ``epsilon`` or when the selected node is deeper than
    ``max_depth``.
    """
    if config is None:
        raise ValueError("a BnbConfig with the initial box is required")
    if ranges is None:
        ranges = compute_fixed_ranges(pm)
    rigid = pm.model.kind is ModelKind.RIGID3D
    if config.box_lo.shape[0] != pm.model.branch_dim:
        raise ValueError(f"initial box must have {pm.model.branch_dim} entries")
    grid = config.rotation_grid
    if rigid and grid is None:
        grid = precompute_rotation_grid(config.box_lo[:3], config.box_hi[:3],
                                        config.grid_resolution, config.grid_margin)
    root_theta_box = branch_box_to_theta_box(pm, config.box_lo, config.box_hi, grid)
    eps = config.epsilon
    qp = qp_matrix(pm, ranges)
    deadline = None if config.time_limit is None else time.perf_counter() + config.time_limit
    ub_cache: dict = {}
    stats = {"bounded": 0, "clamps": 0, "min_eig": np.inf}

    def bound(node: BnbNode, parent_lb: float = -np.inf) -> NodeBound:
        tlo, thi = branch_box_to_theta_box(pm, node.box_lo, node.box_hi, grid)
        nb = lower_bound_node(pm, ranges, tlo, thi, ub_box=root_theta_box, qp=qp, ub_cache=ub_cache)
        # a sub-box can never have a weaker bound than its parent
        node.lb = max(nb.lb, parent_lb)
        node.p_star = nb.p_star
        node.theta_star = nb.theta_star
        stats["bounded"] += 1
        stats["clamps"] += nb.psd_clamp > 0
        stats["min_eig"] = min(stats["min_eig"], nb.min_eig)
        return nb

    root = BnbNode(config.box_lo.copy(), config.box_hi.copy(), 0)
    nb = bound(root)
    p_best, theta_best, e_best = nb.p_star, nb.theta_ub, nb.ub_candidate

    counter = itertools.count()
    heap: list = []
    pruned_min = np.inf
    if root.lb < e_best - eps:
        heapq.heappush(heap, (root.lb, next(counter), root))
    else:
        pruned_min = root.lb

    trace: list[TraceRecord] = []
    termination = Termination.GAP_CLOSED
    iteration = 0
    while heap:
        lb, _, node = heap[0]
        if lb >= e_best - eps:
            # heap minimum is prunable, hence so is everything else
            pruned_min = min(pruned_min, lb)
            heap.clear()
            break
        iteration += 1
        rec = TraceRecord(iteration, min(lb, pruned_min), e_best, len(heap), node.depth)
        trace.append(rec)
        if on_iteration is not None:
            on_iteration(rec)
        if config.max_depth is not None and node.depth > config.max_depth:
            termination = Termination.DEPTH_LIMIT
            break
        if config.max_iterations is not None and iteration > config.max_iterations:
            termination = Termination.ITERATION_LIMIT
            break
        if deadline is not None and time.perf_counter() > deadline:
            termination = Termination.TIME_LIMIT
            break
        heapq.heappop(heap)
        if np.all(node.box_hi - node.box_lo <= 0):
            # a point box cannot be refined further; its bound is final
            pruned_min = min(pruned_min, node.lb)
            continue
        improved = False
        for child in branch(node):
            cb = bound(child, node.lb)
            if cb.ub_candidate < e_best:
                e_best, p_best, theta_best = cb.ub_candidate, cb.p_star, cb.theta_ub
                improved = True
            if child.lb < e_best - eps:
                heapq.heappush(heap, (child.lb, next(counter), child))
            else:
                pruned_min = min(pruned_min, child.lb)
        if improved:
            keep = [item for item in heap if item[0] < e_best - eps]
            if len(keep) < len(heap):
                pruned_min = min([pruned_min] + [item[0] for item in heap if item[0] >= e_best - eps])
                heap = keep
                heapq.heapify(heap)

    active_min = heap[0][0] if heap else np.inf
    global_lb = min(active_min, pruned_min, e_best)
    return BnbResult(p_best, np.asarray(theta_best), float(e_best), float(global_lb), iteration,
                     termination, trace, stats["bounded"], int(stats["clamps"]), float(stats["min_eig"]))
