"""Globally optimal partial-overlap point-set registration by branch and bound."""

from .assignment import expand_kcard_to_square, solve_kcard_lap, solve_lap
from .bnb import BnbConfig, BnbResult, Termination, branch, minimize
from .boxqp import BoxQP, project_psd, solve_box_qp
from .intervals import (IntervalMatrix, interval_mul, interval_square, precompute_rotation_grid,
                        rotation_range_from_box, theta_box_to_Theta_box)
from .problem import (Assignment, DegenerateConfigurationError, PointSet, ProblemMatrices,
                      b2_row_selection, build_matrices, concentrated_energy, evaluate_energy,
                      optimal_theta_for_p)
from .relaxation import (FixedRanges, compute_eta_range, compute_fixed_ranges, compute_gamma_range,
                         lower_bound_node, relax_coeffs, upper_bound_from_p)
from .registration import (MatchReport, Normalization, box_around, default_box, kabsch, matching_error,
                           normalize_pair, register, resolve_n_p, truth_branch_point)
from .synth import Disturbance, GroundTruth, Instance, fish_2d, helix_3d, synthesize
from .transforms import (AFFINE2D, AFFINE3D, RIGID3D, SIMILARITY2D, ModelKind, TransformModel,
                         angle_axis_to_rotation, apply_transform, get_model, jacobian, rigid_to_theta,
                         skew)

__version__ = "0.1.0"
