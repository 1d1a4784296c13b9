"""Closed-loop scenario drivers and run logging.

Each scenario wires the controllers, the allocator and the physics into the
same 100 Hz loop the robot would run, then records one log row per control
tick. Two loop flavors exist: the aerial tick (full position/attitude PID
feeding the thrust-only wrench allocation) and the terrestrial tick (zero
net-wrench demand, joint-relief allocation under the tight torque box, plus
the inner-rotor altitude trim).
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import sim as sim_mod
from .allocation import (AllocationError, AllocationWeights, allocate,
                         build_qp)
from .control import AttitudeController, ControlGains, PositionController, \
    attitude_error
from .gait import (GaitConfig, GaitPlanner, UnreachableTargetError,
                   altitude_allocation, altitude_feedback, leg_ik,
                   nominal_footholds, stance_base_height,
                   stance_joint_targets, support_margin, touchdown_detect)
from .model import (RobotDescription, RobotState, cog_state,
                    forward_kinematics, total_inertia)
from .rotations import rpy_from_matrix
from .sim import ActuatorCommand, SimConfig, sensed_state
from .thrust import commands_to_arrays, wrench_of_link_forces

SCENARIO_NAMES = ("hover", "transform", "leg-lift", "walk", "hybrid")

AERIAL_WEIGHTS = AllocationWeights(thrust=1.0, torque=0.0)
TERRESTRIAL_WEIGHTS = AllocationWeights(thrust=1.0, torque=1.0)


@dataclass
class ScenarioConfig:
    """Knobs for the scripted scenarios (SI units, radians)."""

    name: str = "hover"
    duration: float | None = None        # None picks the scenario default
    control_rate: float = 100.0
    seed: int = 0
    # aerial scenarios
    hover_height: float = 1.0
    start_offset: float = 0.1            # initial altitude error for hover
    transform_hip: float = np.deg2rad(-30.0)
    transform_knee: float = np.deg2rad(60.0)
    transform_rate: float = 0.2          # rad/s commanded ramp slope
    transform_start: float = 2.0
    transform_hold: float = 4.0
    # terrestrial scenarios
    gait: GaitConfig = field(default_factory=GaitConfig)
    terrestrial_torque_limit: float = 1.5
    lift_leg: int = 0
    lift_start: float = 3.0
    lift_hold: float = 8.0
    # hybrid
    takeoff_height: float = 0.8
    takeoff_ramp: float = 5.0
    hover_tail: float = 10.0
    # reporting
    steady_window: float = 4.0

    def resolved_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        return {"hover": 10.0, "transform": 24.0, "leg-lift": 22.0,
                "walk": 150.0, "hybrid": 180.0}[self.name]


def default_scenario(name: str) -> ScenarioConfig:
    if name not in SCENARIO_NAMES:
        raise ValueError(f"unknown scenario {name!r}; "
                         f"choose from {', '.join(SCENARIO_NAMES)}")
    return ScenarioConfig(name=name)


# ---------------------------------------------------------------------------
# logging


class SimLog:
    """Column-oriented run log, one row per control tick."""

    def __init__(self) -> None:
        self.columns: list[str] = []
        self.rows: list[list] = []
        self.events: list[tuple[float, str]] = []
        self.meta: dict = {}

    def append(self, record: dict) -> None:
        if not self.columns:
            self.columns = list(record.keys())
        self.rows.append([record[c] for c in self.columns])

    def event(self, t: float, message: str) -> None:
        self.events.append((float(t), message))

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def array(self, names: list[str] | str) -> np.ndarray:
        if isinstance(names, str):
            names = [names]
        idx = [self.columns.index(n) for n in names]
        return np.array([[row[i] for i in idx] for row in self.rows],
                        dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            writer.writerows(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def _vec_cols(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


POSE_COLS = ["base_x", "base_y", "base_z", "roll", "pitch", "yaw"]
PLOT_SETS = {
    "position_errors": ["t", "err_x", "err_y", "err_z"],
    "rotation_errors": ["t", "err_rx", "err_ry", "err_rz"],
    "joint_trajectories": ["t"] + _vec_cols("q", 16) + _vec_cols("qd", 16),
    "joint_torques": ["t"] + _vec_cols("tau", 16),
    "rotor_thrusts": ["t"] + _vec_cols("lam", 8) + _vec_cols("lam_cmd", 8),
}


def write_plot_csvs(log: SimLog, directory) -> list[str]:
    """Emit one tidy CSV per figure panel; returns the file paths."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for name, cols in PLOT_SETS.items():
        path = os.path.join(directory, f"{name}.csv")
        data = log.array(cols)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            writer.writerows(data.tolist())
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# control loop engine


class Engine:
    """Shared state for one closed-loop run."""

    def __init__(self, desc: RobotDescription, scen: ScenarioConfig,
                 sim_cfg: SimConfig, gains: ControlGains):
        self.desc = desc
        self.scen = scen
        self.sim_cfg = sim_cfg
        self.gains = gains
        self.control_dt = 1.0 / scen.control_rate
        substeps = self.control_dt / sim_cfg.timestep
        self.substeps = int(round(substeps))
        if abs(substeps - self.substeps) > 1e-9 or self.substeps < 1:
            raise ValueError("control period must be a multiple of the "
                             "physics timestep")
        self.rng = np.random.default_rng(scen.seed)
        self.pos_ctrl = PositionController(gains, desc.total_mass,
                                           sim_cfg.gravity)
        self.att_ctrl = AttitudeController(gains)
        self.log = SimLog()
        self.t = 0.0
        self.state: RobotState | None = None
        self.frames = None
        self.prefer: tuple[int, ...] = ()
        self.prev_cmd: ActuatorCommand | None = None
        self.infeasible = 0

    # -- state handling -----------------------------------------------------

    def set_state(self, state: RobotState) -> None:
        self.state = state
        self.frames = forward_kinematics(self.desc, state, check_limits=False)

    def _sensed(self):
        sensed = sensed_state(self.state, self.sim_cfg, self.rng)
        if sensed is self.state:
            return sensed, self.frames
        return sensed, forward_kinematics(self.desc, sensed,
                                          check_limits=False)

    # -- one control tick ---------------------------------------------------

    def tick_aerial(self, pos_des: np.ndarray, vel_des: np.ndarray,
                    rot_des: np.ndarray, joint_des: np.ndarray,
                    phase: str) -> None:
        desc, dt = self.desc, self.control_dt
        sensed, frames = self._sensed()
        cog_pos, cog_vel = cog_state(desc, frames, sensed)
        rot = sensed.base_rotation

        force = self.pos_ctrl.update(cog_pos, cog_vel, rot, pos_des, vel_des,
                                     np.zeros(3), dt)
        inertia = total_inertia(desc, frames)
        torque = self.att_ctrl.update(rot, rot_des, sensed.base_ang_vel,
                                      np.zeros(3), inertia, np.zeros(3), dt)
        wrench = np.concatenate([force, torque])

        result, cmd = self._allocate(frames, sensed, wrench, (),
                                     AERIAL_WEIGHTS, None, None, joint_des)
        err = pos_des - cog_pos
        e_rot = attitude_error(rot, rot_des)
        self._record(cmd, result, wrench, err, e_rot, pos_des, rot_des,
                     joint_des, (), None, phase, 0.0)
        self._advance(cmd)

    def tick_terrestrial(self, joint_des: np.ndarray,
                         contacts: tuple[int, ...], lifted: int | None,
                         torso_des: np.ndarray, phase: str) -> None:
        sensed, frames = self._sensed()
        scen, dt = self.scen, self.control_dt
        pos = sensed.base_position
        vel = sensed.base_lin_vel
        rot = sensed.base_rotation
        rot_des = np.eye(3)

        # Altitude is owned by the inner-rotor trim; the stance itself
        # carries gravity, so the pose wrench is pure feedback: the xy
        # position PID (z channel muted by targeting the measured value)
        # plus the attitude PID that keeps the torso level near the
        # support margin. Passing one body weight as the contact sum
        # cancels the controller's gravity feedforward exactly.
        f_z = altitude_feedback(torso_des[2], float(pos[2]),
                                self.gains.altitude_p)
        trim = altitude_allocation(self.desc, frames, f_z)
        pos_des = np.array([torso_des[0], torso_des[1], pos[2]])
        vel_des = np.array([0.0, 0.0, vel[2]])
        force = self.pos_ctrl.update(pos, vel, rot, pos_des, vel_des,
                                     self.pos_ctrl.weight, dt)
        inertia = total_inertia(self.desc, frames)
        torque = self.att_ctrl.update(rot, rot_des, sensed.base_ang_vel,
                                      np.zeros(3), inertia, np.zeros(3), dt)
        wrench = np.concatenate([force, torque])
        result, cmd = self._allocate(
            frames, sensed, wrench, contacts, TERRESTRIAL_WEIGHTS,
            scen.terrestrial_torque_limit, trim, joint_des)

        err = torso_des - pos
        e_rot = attitude_error(rot, rot_des)
        self._record(cmd, result, wrench, err, e_rot, torso_des, rot_des,
                     joint_des, contacts, lifted, phase, f_z)
        self._advance(cmd)

    def _allocate(self, frames, sensed, wrench, contacts, weights,
                  torque_limit, extra, joint_des):
        try:
            result = allocate(
                self.desc, frames, wrench, contact_legs=contacts,
                weights=weights, gravity=self.sim_cfg.gravity,
                torque_limit=torque_limit, extra_link_forces=extra,
                hold_roll=sensed.vectoring_roll,
                hold_pitch=sensed.vectoring_pitch,
                prefer=self.prefer,
            )
        except AllocationError as exc:
            self.infeasible += 1
            self.log.event(self.t, f"allocation failed: {exc}")
            if self.prev_cmd is not None:
                cmd = replace(self.prev_cmd, joint_des=joint_des.copy())
            else:
                cmd = ActuatorCommand.hold(self.state)
                cmd.joint_des = joint_des.copy()
            return None, cmd
        self.prefer = result.qp.active
        lam, rolls, pitches = commands_to_arrays(result.commands)
        cmd = ActuatorCommand(thrust_des=lam, roll_des=rolls,
                              pitch_des=pitches, joint_des=joint_des.copy(),
                              joint_torque_ff=result.joint_torques.copy())
        self.prev_cmd = cmd
        return result, cmd

    def _advance(self, cmd: ActuatorCommand) -> None:
        state, frames = self.state, self.frames
        for _ in range(self.substeps):
            state, diag = sim_mod.step(self.desc, state, cmd, self.sim_cfg,
                                       frames=frames)
            frames = diag.frames_next
        self.state, self.frames = state, frames
        self.t += self.control_dt

    # -- logging ------------------------------------------------------------

    def _record(self, cmd, result, wrench, err, e_rot, pos_des, rot_des,
                joint_des, contacts, lifted, phase, trim_fz) -> None:
        desc = self.desc
        truth, frames = self.state, self.frames
        rpy = rpy_from_matrix(truth.base_rotation)
        rpy_des = rpy_from_matrix(rot_des)
        fc, _ = sim_mod.contact_forces(desc, frames, truth, self.sim_cfg)
        feet_w = frames.foot_pos_world()
        if contacts:
            margin = support_margin(feet_w[list(contacts)][:, :2],
                                    frames.cog_world()[:2])
        else:
            margin = np.nan

        rec = {"t": round(self.t, 9)}
        for name, val in zip(POSE_COLS,
                             np.concatenate([truth.base_position, rpy])):
            rec[name] = val
        for name, val in zip(["vx", "vy", "vz", "wx", "wy", "wz"],
                             np.concatenate([truth.base_lin_vel,
                                             truth.base_ang_vel])):
            rec[name] = val
        cog_w = frames.cog_world()
        rec.update(cog_x=cog_w[0], cog_y=cog_w[1], cog_z=cog_w[2])
        for name, val in zip(["tgt_x", "tgt_y", "tgt_z"], pos_des):
            rec[name] = val
        for name, val in zip(["tgt_roll", "tgt_pitch", "tgt_yaw"], rpy_des):
            rec[name] = val
        for name, val in zip(["err_x", "err_y", "err_z"], err):
            rec[name] = val
        for name, val in zip(["err_rx", "err_ry", "err_rz"], e_rot):
            rec[name] = val
        for i in range(desc.n_joints):
            rec[f"q{i}"] = truth.joint_angles[i]
        for i in range(desc.n_joints):
            rec[f"qd{i}"] = joint_des[i]
        tau = (result.joint_torques if result is not None
               else np.full(desc.n_joints, np.nan))
        for i in range(desc.n_joints):
            rec[f"tau{i}"] = tau[i]
        for i in range(desc.n_rotors):
            rec[f"lam{i}"] = truth.thrusts[i]
        for i in range(desc.n_rotors):
            rec[f"lam_cmd{i}"] = cmd.thrust_des[i]
        for i in range(desc.n_rotors):
            rec[f"vroll{i}"] = truth.vectoring_roll[i]
        for i in range(desc.n_rotors):
            rec[f"vpitch{i}"] = truth.vectoring_pitch[i]
        for i in range(desc.n_rotors):
            rec[f"roll_cmd{i}"] = cmd.roll_des[i]
        for i in range(desc.n_rotors):
            rec[f"pitch_cmd{i}"] = cmd.pitch_des[i]
        for leg in range(desc.n_legs):
            rec[f"fn{leg}"] = fc[leg, 2]
        rec["n_contact_declared"] = len(contacts)
        rec["n_contact_physical"] = int(np.sum(fc[:, 2] > 0.0))
        rec["phase"] = phase
        rec["lifted"] = -1 if lifted is None else int(lifted)
        rec["margin"] = margin
        for name, val in zip(["wd_fx", "wd_fy", "wd_fz",
                              "wd_mx", "wd_my", "wd_mz"], wrench):
            rec[name] = val
        rec["trim_fz"] = trim_fz
        rec["qp_ok"] = 0 if result is None else 1
        rec["qp_iters"] = result.qp.iterations if result is not None else -1
        rec["qp_ms"] = (result.qp.solve_time * 1e3 if result is not None
                        else np.nan)
        rec["refine_iters"] = (result.refine.iterations
                               if result is not None and result.refine
                               else 0)
        self.log.append(rec)


# ---------------------------------------------------------------------------
# scenario drivers


def _run_hover(engine: Engine) -> None:
    scen, desc = engine.scen, engine.desc
    state = RobotState.rest(desc, height=scen.hover_height - scen.start_offset)
    state.thrusts[:] = desc.total_mass * 9.8 / desc.n_rotors
    engine.set_state(state)
    target = np.array([0.0, 0.0, scen.hover_height])
    joint_des = np.zeros(desc.n_joints)
    duration = scen.resolved_duration()
    while engine.t < duration:
        engine.tick_aerial(target, np.zeros(3), np.eye(3), joint_des,
                           "aerial")


def _transform_profile(scen: ScenarioConfig, t: float
                       ) -> tuple[float, float, bool]:
    """Hip and knee targets plus a motion-active flag at time t."""
    span = max(abs(scen.transform_hip), abs(scen.transform_knee))
    ramp = span / scen.transform_rate
    t1 = scen.transform_start
    t2 = t1 + ramp                      # folded
    t3 = t2 + scen.transform_hold
    t4 = t3 + ramp                      # back flat
    if t < t1:
        frac, active = 0.0, False
    elif t < t2:
        frac, active = (t - t1) / ramp, True
    elif t < t3:
        frac, active = 1.0, False
    else:
        frac, active = max(1.0 - (t - t3) / ramp, 0.0), t < t4
    return frac * scen.transform_hip, frac * scen.transform_knee, active


def _run_transform(engine: Engine) -> None:
    scen, desc = engine.scen, engine.desc
    state = RobotState.rest(desc, height=scen.hover_height)
    state.thrusts[:] = desc.total_mass * 9.8 / desc.n_rotors
    engine.set_state(state)
    target = np.array([0.0, 0.0, scen.hover_height])
    duration = scen.resolved_duration()
    while engine.t < duration:
        hip, knee, active = _transform_profile(scen, engine.t)
        joint_des = np.zeros(desc.n_joints)
        for leg in range(desc.n_legs):
            joint_des[4 * leg + 1] = hip
            joint_des[4 * leg + 3] = knee
        phase = "transform" if active else "aerial"
        engine.tick_aerial(target, np.zeros(3), np.eye(3), joint_des, phase)
    span = max(abs(scen.transform_hip), abs(scen.transform_knee))
    ramp = span / scen.transform_rate
    engine.log.meta["motion_windows"] = [
        [scen.transform_start, scen.transform_start + ramp],
        [scen.transform_start + ramp + scen.transform_hold,
         scen.transform_start + 2 * ramp + scen.transform_hold],
    ]


def _stance_start(desc: RobotDescription, cfg: GaitConfig) -> RobotState:
    state = RobotState.rest(desc, height=stance_base_height(desc, cfg))
    state.joint_angles = stance_joint_targets(desc, cfg)
    return state


def _run_leg_lift(engine: Engine) -> None:
    scen, desc = engine.scen, engine.desc
    cfg = scen.gait
    engine.set_state(_stance_start(desc, cfg))
    height = stance_base_height(desc, cfg)
    torso_des = np.array([0.0, 0.0, height])
    stance_q = stance_joint_targets(desc, cfg)
    leg = scen.lift_leg
    foothold = nominal_footholds(desc, cfg, np.zeros(2))[leg]

    raised_q = stance_q.copy()
    target_base = np.array([foothold[0], foothold[1],
                            desc.foot_radius + cfg.lift_height - height])
    q_yaw, q_hip, q_knee = leg_ik(desc, leg, target_base)
    raised_q[4 * leg:4 * leg + 4] = (q_yaw, q_hip, 0.0, q_knee)

    t_up = scen.lift_start
    t_down = t_up + scen.lift_hold
    duration = scen.resolved_duration()
    all_legs = tuple(range(desc.n_legs))
    standing = tuple(k for k in all_legs if k != leg)
    hip_idx = 4 * leg + 1
    landed = False
    while engine.t < duration:
        t = engine.t
        if t < t_up:
            engine.tick_terrestrial(stance_q, all_legs, None, torso_des,
                                    "stand")
        elif t < t_down:
            engine.tick_terrestrial(raised_q, standing, leg, torso_des,
                                    "lift")
        else:
            if not landed:
                landed = touchdown_detect(stance_q[hip_idx],
                                          engine.state.joint_angles[hip_idx],
                                          cfg.touchdown_threshold)
            if landed:
                engine.tick_terrestrial(stance_q, all_legs, None, torso_des,
                                        "stand")
            else:
                engine.tick_terrestrial(stance_q, standing, leg, torso_des,
                                        "lower")
    engine.log.meta["lift_window"] = [t_up, t_down]


def _run_walk(engine: Engine) -> None:
    scen, desc = engine.scen, engine.desc
    cfg = scen.gait
    engine.set_state(_stance_start(desc, cfg))
    planner = GaitPlanner(desc, cfg)
    duration = scen.resolved_duration()
    settle_end = None
    while engine.t < duration:
        cmd = planner.step(engine.state, engine.t)
        label = cmd.phase if cmd.stage is None else f"{cmd.phase}_{cmd.stage}"
        engine.tick_terrestrial(cmd.joint_targets, cmd.contact_legs,
                                cmd.lifted_leg, cmd.torso_target, label)
        if cmd.done:
            if settle_end is None:
                settle_end = engine.t + 2.0
            if engine.t >= settle_end:
                break
    engine.log.meta["planned_final"] = \
        list(planner.gait.torso_xy) + [planner.base_height]
    engine.log.meta["cycles_completed"] = planner.gait.cycle
    engine.log.meta["footholds_final"] = planner.gait.footholds.tolist()


def _run_hybrid(engine: Engine) -> None:
    scen, desc = engine.scen, engine.desc
    cfg = scen.gait
    engine.set_state(_stance_start(desc, cfg))
    planner = GaitPlanner(desc, cfg)
    duration = scen.resolved_duration()
    switch_t = None
    takeoff_from = None
    stance_q = None
    infeasible_at_switch = 0
    while engine.t < duration:
        if switch_t is None or engine.t < switch_t:
            cmd = planner.step(engine.state, engine.t)
            label = cmd.phase if cmd.stage is None else \
                f"{cmd.phase}_{cmd.stage}"
            engine.tick_terrestrial(cmd.joint_targets, cmd.contact_legs,
                                    cmd.lifted_leg, cmd.torso_target, label)
            if cmd.done and switch_t is None:
                switch_t = engine.t + 1.0
                stance_q = cmd.joint_targets.copy()
                engine.log.meta["cycles_completed"] = planner.gait.cycle
                engine.log.meta["planned_final"] = \
                    list(planner.gait.torso_xy) + [planner.base_height]
            continue
        if takeoff_from is None:
            takeoff_from = engine.frames.cog_world().copy()
            engine.log.meta["switch_time"] = engine.t
            infeasible_at_switch = engine.infeasible
        frac = np.clip((engine.t - switch_t) / scen.takeoff_ramp, 0.0, 1.0)
        goal = np.array([takeoff_from[0], takeoff_from[1],
                         scen.takeoff_height])
        target = (1.0 - frac) * takeoff_from + frac * goal
        engine.tick_aerial(target, np.zeros(3), np.eye(3), stance_q,
                           "aerial")
        if engine.t >= switch_t + scen.takeoff_ramp + scen.hover_tail:
            break
    engine.log.meta["infeasible_after_switch"] = \
        engine.infeasible - infeasible_at_switch


_RUNNERS = {"hover": _run_hover, "transform": _run_transform,
            "leg-lift": _run_leg_lift, "walk": _run_walk,
            "hybrid": _run_hybrid}


def run_scenario(desc: RobotDescription, scen: ScenarioConfig,
                 sim_cfg: SimConfig | None = None,
                 gains: ControlGains | None = None) -> SimLog:
    """Execute one scenario end to end; returns the complete log.

    Divergence stops the run and is noted in the log's meta; allocation
    infeasibility is recorded per event and the run continues on the
    previous actuator command.
    """
    sim_cfg = sim_cfg or SimConfig()
    gains = gains or ControlGains()
    engine = Engine(desc, scen, sim_cfg, gains)
    engine.log.meta.update(scenario=scen.name, seed=scen.seed,
                           control_rate=scen.control_rate,
                           timestep=sim_cfg.timestep)
    start = time.perf_counter()
    try:
        _RUNNERS[scen.name](engine)
        engine.log.meta["final_status"] = "ok"
    except sim_mod.SimDivergenceError as exc:
        engine.log.event(engine.t, f"divergence: {exc}")
        engine.log.meta["final_status"] = "diverged"
        engine.log.meta["diverged_at"] = engine.t
    except UnreachableTargetError as exc:
        engine.log.event(engine.t, f"gait target unreachable: {exc}")
        engine.log.meta["final_status"] = "gait-infeasible"
        engine.log.meta["failed_at"] = engine.t
    engine.log.meta["wall_time"] = time.perf_counter() - start
    engine.log.meta["infeasible_count"] = engine.infeasible
    return engine.log


# ---------------------------------------------------------------------------
# summary


def summarize(log: SimLog, scen: ScenarioConfig) -> dict:
    """Reduce a log to the JSON run summary."""
    t = log.column("t").astype(float)
    err = log.array(["err_x", "err_y", "err_z"])
    e_rot = log.array(["err_rx", "err_ry", "err_rz"])
    steady = t >= (t[-1] - scen.steady_window)
    att_deg = np.rad2deg(np.arcsin(np.clip(
        np.linalg.norm(e_rot, axis=1), -1.0, 1.0)))

    out = {
        "scenario": scen.name,
        "seed": scen.seed,
        "duration": float(t[-1]) if len(t) else 0.0,
        "ticks": len(log),
        "final_status": log.meta.get("final_status", "unknown"),
        "infeasible_count": int(log.meta.get("infeasible_count", 0)),
        "rms_error_m": [float(v) for v in
                        np.sqrt(np.mean(err[steady] ** 2, axis=0))],
        "max_error_m": [float(v) for v in
                        np.max(np.abs(err[steady]), axis=0)],
        "steady_attitude_deg": float(np.max(att_deg[steady])),
        "events": [[tt, msg] for tt, msg in log.events],
    }
    for key in ("switch_time", "cycles_completed", "planned_final",
                "motion_windows", "lift_window", "infeasible_after_switch",
                "diverged_at", "wall_time"):
        if key in log.meta:
            out[key] = log.meta[key]

    if scen.name in ("walk", "hybrid") and "planned_final" in log.meta:
        planned = np.asarray(log.meta["planned_final"], dtype=float)
        final = log.array(["base_x", "base_y", "base_z"])[-1]
        out["drift_m"] = [float(v) for v in (final - planned)]
        out["drift_norm_m"] = float(np.hypot(*(final[:2] - planned[:2])))
        out["final_yaw_deg"] = float(np.rad2deg(log.column("yaw")[-1]))
    if scen.name in ("walk", "leg-lift", "hybrid"):
        margin = log.column("margin").astype(float)
        lifted = log.column("lifted").astype(int)
        fn = log.array([f"fn{k}" for k in range(4)])
        airborne = np.zeros(len(t), dtype=bool)
        for i in range(len(t)):
            if lifted[i] >= 0:
                airborne[i] = fn[i, lifted[i]] <= 0.0
        if np.any(airborne):
            out["min_margin_airborne"] = float(np.nanmin(margin[airborne]))
        terrestrial = log.column("n_contact_declared").astype(int) > 0
        late = terrestrial & (t > 0.5)
        if np.any(late):
            out["min_physical_contacts"] = int(
                np.min(log.column("n_contact_physical")[late]))
    if scen.name == "leg-lift":
        tau = log.array([f"tau{i}" for i in range(16)])
        ok = log.column("qp_ok").astype(int) == 1
        out["max_joint_torque"] = float(np.max(np.abs(tau[ok])))
    return out


# ---------------------------------------------------------------------------
# allocation verification (no physics)


def verify_allocation(desc: RobotDescription, cases: int = 1000,
                      seed: int = 0) -> dict:
    """Random-pose allocation audit used by the verification subcommand.

    Poses draw every joint uniformly in +/-60 deg with the contact mode
    cycling through airborne, three-legged and four-legged; aerial cases
    demand the gravity-compensation wrench, contact cases the zero wrench.
    Reports the worst constraint residuals and the realized-wrench error
    after the offset-aware refinement.
    """
    rng = np.random.default_rng(seed)
    worst = {"wrench": 0.0, "equilibrium": 0.0, "bounds": 0.0, "refined": 0.0}
    times: list[float] = []
    failures: list[list] = []
    modes = [(), (1, 2, 3), (0, 1, 2, 3)]
    for case in range(cases):
        state = RobotState.rest(desc, height=0.5)
        state.joint_angles = rng.uniform(-np.pi / 3, np.pi / 3, desc.n_joints)
        frames = forward_kinematics(desc, state)
        contacts = modes[case % len(modes)]
        if contacts:
            wrench = np.zeros(6)
            weights = TERRESTRIAL_WEIGHTS
        else:
            wrench = np.array([0.0, 0.0, desc.total_mass * 9.8, 0.0, 0.0, 0.0])
            weights = AERIAL_WEIGHTS
        try:
            result = allocate(desc, frames, wrench, contact_legs=contacts,
                              weights=weights)
        except AllocationError as exc:
            failures.append([case, str(exc)])
            continue
        times.append(result.qp.solve_time)
        worst["wrench"] = max(worst["wrench"], result.qp.wrench_residual)
        worst["equilibrium"] = max(worst["equilibrium"],
                                   result.qp.equilibrium_residual)
        problem = build_qp(desc, frames, wrench, contacts, weights)
        x = np.concatenate([result.qp.link_forces.ravel(),
                            result.qp.joint_torques,
                            result.qp.contact_forces.ravel()])
        if problem.a_in.shape[0]:
            viol = np.max(np.maximum(problem.a_in @ x - problem.b_in, 0.0))
            worst["bounds"] = max(worst["bounds"], float(viol))
        realized = wrench_of_link_forces(desc, frames, result.link_forces)
        worst["refined"] = max(worst["refined"], float(np.max(np.abs(
            realized - result.wrench_target))))
    return {
        "cases": cases,
        "failures": failures,
        "max_wrench_residual": worst["wrench"],
        "max_equilibrium_residual": worst["equilibrium"],
        "max_bounds_violation": worst["bounds"],
        "max_refined_residual": worst["refined"],
        "mean_solve_ms": float(np.mean(times) * 1e3) if times else None,
        "max_solve_ms": float(np.max(times) * 1e3) if times else None,
    }
