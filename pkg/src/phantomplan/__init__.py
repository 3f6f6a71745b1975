"""Trajectory optimization and closed-loop replanning under object-existence
uncertainty: homotopic maneuver alternatives blended by detection-confusion
weights, with a guaranteed full-braking fallback.
"""

from .probkit import (DetectorModel, ManeuverWeights, TruncatedNormal,
                      detection_weights, erf_approx)
from .refpath import RefPath
from .trajectory import (CombinedVector, ManeuverId, Trajectory, build_combined,
                         combine_pair, extract_maneuver, forward_diffs)
from .scene import (FovBoundary, ObjectTrace, PlanningScene, PredictedObject,
                    Scenario)
from .costs import (CostReport, CostWeights, collision_soft_cost, combined_cost,
                    combined_gradient, smoothness_cost)
from .safety import (check_stop_feasibility, constraint_set, stop_distance,
                     yield_intention_clear)
from .solver import (Solution, SolverConfig, solve_combined, solve_fallback_z,
                     solve_single)

__version__ = "0.1.0"
