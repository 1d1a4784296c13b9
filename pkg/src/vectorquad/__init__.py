"""Thrust-assisted quadruped: model, allocation, control and simulation.

A quadruped whose eight leg links each carry a spherically vectorable
dual-rotor module. The same thrust apparatus flies the robot, offloads its
joint servos while standing, and assists the creeping gait; this package
provides the articulated model, the wrench-allocation QP, the flight and
terrestrial control loops, the gait planner, a desk-scale simulator and a
scenario CLI.
"""

from .allocation import (AllocationError, AllocationResult,
                         AllocationSolution, AllocationWeights, allocate,
                         build_qp, gravity_wrench, solve_allocation)
from .control import (AttitudeController, ControlGains, PositionController,
                      WrenchCommand, attitude_error, contact_moment,
                      joint_pd, omega_error)
from .gait import (GaitCommand, GaitConfig, GaitPlanner, GaitState,
                   UnreachableTargetError, altitude_allocation,
                   altitude_feedback, leg_ik, stance_base_height,
                   stance_joint_targets, support_margin, touchdown_detect)
from .model import (FrameSet, JointLimitError, RobotDescription, RobotState,
                    cog_state, forward_kinematics, jacobian, total_inertia)
from .qp import QPResult, solve_qp
from .scenarios import (AERIAL_WEIGHTS, SCENARIO_NAMES, TERRESTRIAL_WEIGHTS,
                        ScenarioConfig, SimLog, default_scenario,
                        run_scenario, summarize)
from .sim import (ActuatorCommand, SimConfig, SimDivergenceError,
                  contact_forces, mechanical_energy, step)
from .thrust import (DegenerateThrustError, RefineResult, RotorCommand,
                     allocation_matrix, extract_angles, link_frame_force,
                     refine_allocation, thrust_direction,
                     wrench_of_link_forces)

__version__ = "0.1.0"

__all__ = [
    "AERIAL_WEIGHTS",
    "ActuatorCommand",
    "AllocationError",
    "AllocationResult",
    "AllocationSolution",
    "AllocationWeights",
    "AttitudeController",
    "ControlGains",
    "DegenerateThrustError",
    "FrameSet",
    "GaitCommand",
    "GaitConfig",
    "GaitPlanner",
    "GaitState",
    "JointLimitError",
    "PositionController",
    "QPResult",
    "RefineResult",
    "RobotDescription",
    "RobotState",
    "RotorCommand",
    "SCENARIO_NAMES",
    "ScenarioConfig",
    "SimConfig",
    "SimDivergenceError",
    "SimLog",
    "TERRESTRIAL_WEIGHTS",
    "UnreachableTargetError",
    "WrenchCommand",
    "allocate",
    "allocation_matrix",
    "altitude_allocation",
    "altitude_feedback",
    "attitude_error",
    "build_qp",
    "cog_state",
    "contact_forces",
    "contact_moment",
    "default_scenario",
    "extract_angles",
    "forward_kinematics",
    "gravity_wrench",
    "jacobian",
    "joint_pd",
    "leg_ik",
    "link_frame_force",
    "mechanical_energy",
    "omega_error",
    "refine_allocation",
    "run_scenario",
    "solve_allocation",
    "solve_qp",
    "stance_base_height",
    "stance_joint_targets",
    "step",
    "summarize",
    "support_margin",
    "thrust_direction",
    "total_inertia",
    "touchdown_detect",
    "wrench_of_link_forces",
]
