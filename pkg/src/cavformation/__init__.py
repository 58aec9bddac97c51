"""Multi-lane formation control for connected automated vehicles.

Pipeline: targets and assignment (``assignment``), conflict-free grid plans
(``mapf``), Bezier stage trajectories (``trajectory``) and closed-loop
tracking (``simulator``). ``scenario`` and ``bench`` drive it end to end.
"""
from .assignment import (Assignment, AssignmentProblem, Label, LanePreference, assign,
                         build_cost_matrix, build_preference_matrix, generate_targets, hungarian,
                         solve_assignment)
from .errors import (Blocked, FormationError, InfeasiblePreferences, InfeasibleScenario,
                     InfeasibleTargets, NoPath, NonMonotonic, OffTrack, OutOfBounds, SimFailure)
from .grid import (Action, Conflict, ConflictKind, FormationSpec, GridMap, PathPlan, RelPoint,
                   Structure, apply_action, interlaced_cells, parallel_cells, validate_plan_set)
from .mapf import (Constraint, PlanResult, Status, astar_single, detect_first_conflict,
                   joint_state_oracle, plan_cbs, plan_priority_astar)
from .simulator import ControllerConfig, SimTrace, VehicleState, run_simulation, step_vehicle
from .trajectory import StageSchedule, TrajectorySegment, build_schedule, build_segment, project_point

__version__ = "0.1.0"
