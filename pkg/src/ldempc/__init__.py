"""Linearly discounted economic MPC without terminal conditions."""
from .discount import CONSTANT, LINEAR, DiscountProfile, parse_discount, weight, weight_sum, weights
from .metrics import (MetricsReport, aap_estimate, accumulated_cost, feasibility_margin, report,
                      rotated_cost, transient_performance, turnpike_count)
from .model import (DomainError, FeasibilityReport, GraphModel, SmoothModel, Trajectory, Transition,
                    TransitionError, check_feasible, rollout, shift_cost_nonneg, stage_cost)
from .mpc import Controller, RecursiveFeasibilityError, ReusedPlan, make_controller, warm_start_plan
from .ocp import (OcpSolution, SolverOptions, dpp_residual, evaluate_cost, solve_dp_finite, solve_ocp,
                  solve_smooth)
from .orbit import (PeriodicOrbit, ScanResult, best_orbit, distance, is_minimal, minimum_mean_cycle,
                    scan_periods)
from .simulate import ClosedLoopTrace, run_closed_loop

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
