"""Terrestrial locomotion: altitude trim, leg inverse kinematics and the
creeping gait.

The planner walks the robot along +x with the classic one-leg-at-a-time
sequence front-left, front-right, torso shift, rear-right, rear-left. Foot
targets are planned in world coordinates; by default the plan advances from
its own previous targets (feed-forward), which lets small tracking errors
accumulate into a measurable drift. Setting ``feedback_planning`` instead
re-estimates the accumulated ground slip at every stage boundary from the
measured positions of the planted feet and counter-steers placements.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import FrameSet, RobotDescription, RobotState, forward_kinematics
from .rotations import rot_z, wrap_angle
from .thrust import force_block


class UnreachableTargetError(ValueError):
    """Foot target outside the leg workspace; carries the distance deficit."""

    def __init__(self, message: str, deficit: float):
        super().__init__(message)
        self.deficit = deficit


# ---------------------------------------------------------------------------
# torso altitude loop


def altitude_feedback(z_des: float, z: float, gain: float) -> float:
    """Proportional vertical-force demand for the standing torso."""
    return gain * (z_des - z)


def altitude_allocation(desc: RobotDescription, frames: FrameSet,
                        f_z_des: float) -> np.ndarray:
    """Distribute a vertical force demand over the inner-link rotors only.

    Returns an (8, 3) array of additional link-frame forces; outer-link rows
    are always zero. The inner rotors' wrench map is inverted least-norm, so
    the realized extra wrench equals (0, 0, f_z_des, 0, 0, 0) whenever that
    map has full row rank; otherwise the closest achievable wrench is used
    and a warning is issued.
    """
    inner = desc.inner_rotors
    q_tilde = np.hstack([force_block(frames, i) for i in inner])
    delta_w = np.array([0.0, 0.0, float(f_z_des), 0.0, 0.0, 0.0])
    if np.linalg.matrix_rank(q_tilde, tol=1e-9) < 6:
        warnings.warn("inner-rotor wrench map is rank deficient; "
                      "altitude trim is least-squares only", RuntimeWarning)
    flat = np.linalg.pinv(q_tilde) @ delta_w
    out = np.zeros((desc.n_rotors, 3))
    for k, i in enumerate(inner):
        out[i] = flat[3 * k:3 * k + 3]
    return out


# ---------------------------------------------------------------------------
# leg inverse kinematics


def leg_ik(desc: RobotDescription, leg: int, target_base: np.ndarray,
           knee_yaw: float = 0.0) -> tuple[float, float, float]:
    """Closed-form (hip_yaw, hip_pitch, knee_pitch) for a foot target.

    ``target_base`` is the foot sphere center in baselink coordinates. The
    knee yaw is not solved; it is taken as given (zero during walking) and
    the three remaining angles are determined uniquely with the knee-up
    branch of the two-link chain. Raises UnreachableTargetError when the
    target lies outside the workspace annulus or the solution violates a
    joint limit.
    """
    if not 0 <= leg < desc.n_legs:
        raise ValueError(f"no leg {leg}")
    ell = desc.link_length
    alpha = desc.leg_angles[leg]
    hip = desc.torso_half_width * np.array([np.cos(alpha), np.sin(alpha), 0.0])
    d = np.asarray(target_base, dtype=float) - hip

    # knee pitch from the hip-foot distance
    r2 = float(d @ d)
    c3, s3 = np.cos(knee_yaw), np.sin(knee_yaw)
    denom = 2.0 * ell * ell * c3
    if denom <= 0.0:
        raise UnreachableTargetError(
            f"knee yaw {knee_yaw:.3f} rad leaves no pitch solution", np.inf)
    cos_knee = (r2 - 2.0 * ell * ell) / denom
    if cos_knee > 1.0:
        deficit = np.sqrt(r2) - ell * np.sqrt(2.0 + 2.0 * c3)
    elif cos_knee < -1.0:
        deficit = ell * np.sqrt(max(2.0 - 2.0 * c3, 0.0)) - np.sqrt(r2)
    else:
        deficit = 0.0
    if deficit > 1e-12:
        raise UnreachableTargetError(
            f"foot target {np.round(target_base, 4)} misses leg {leg} "
            f"workspace by {deficit:.4f} m", deficit)
    q_knee = float(np.arccos(np.clip(cos_knee, -1.0, 1.0)))  # knee-up branch

    # hip yaw: rotate the horizontal component onto the leg plane, leaving
    # exactly the lateral offset the held knee yaw produces
    v = np.array([ell * (1.0 + c3 * np.cos(q_knee)),
                  ell * s3 * np.cos(q_knee),
                  -ell * np.sin(q_knee)])
    planar2 = d[0] * d[0] + d[1] * d[1]
    lateral2 = v[1] * v[1]
    if planar2 < lateral2 - 1e-12:
        raise UnreachableTargetError(
            f"foot target {np.round(target_base, 4)} is too close to the "
            f"hip yaw axis of leg {leg}", float(np.sqrt(lateral2 - planar2)))
    dx = float(np.sqrt(max(planar2 - lateral2, 0.0)))
    heading = np.arctan2(d[1], d[0]) - np.arctan2(v[1], dx)
    q_yaw = wrap_angle(heading - alpha)

    # hip pitch in the (radial, vertical) plane of the yawed leg
    q_pitch = float(np.arctan2(-d[2], dx) - np.arctan2(-v[2], v[0]))

    for q, name in ((q_yaw, "hip yaw"), (q_pitch, "hip pitch"),
                    (q_knee, "knee pitch")):
        if abs(q) > desc.joint_limit + 1e-12:
            raise UnreachableTargetError(
                f"leg {leg} {name} solution {q:.3f} rad exceeds the "
                f"+/-{desc.joint_limit:.3f} rad limit",
                abs(q) - desc.joint_limit)
    return float(q_yaw), float(q_pitch), q_knee


def touchdown_detect(q_des_hip_pitch: float, q_hip_pitch: float,
                     threshold: float) -> bool:
    """Tracking-error touchdown rule for the lowering hip pitch.

    The error is signed: lowering drives the pitch upward toward its target,
    so contact (or arrival) is the moment q_des - q falls under the
    threshold.
    """
    return (q_des_hip_pitch - q_hip_pitch) < threshold


def support_margin(points_xy: np.ndarray, probe_xy: np.ndarray) -> float:
    """Signed distance from a ground point to the support polygon boundary.

    Positive inside, negative outside. Points are the standing feet's ground
    projections; they are convex by construction here (3 or 4 feet around
    the torso), so a centroid-angle ordering gives the hull directly.
    """
    pts = np.asarray(points_xy, dtype=float)
    probe = np.asarray(probe_xy, dtype=float)
    if len(pts) < 3:
        return -np.inf
    center = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    pts = pts[order]
    margin = np.inf
    for i in range(len(pts)):
        a, b = pts[i], pts[(i + 1) % len(pts)]
        edge = b - a
        norm = np.hypot(edge[0], edge[1])
        if norm < 1e-12:
            continue
        # inward normal for counter-clockwise ordering
        rel = probe - a
        margin = min(margin, float(edge[0] * rel[1] - edge[1] * rel[0]) / norm)
    return float(margin)


# ---------------------------------------------------------------------------
# creeping gait


@dataclass
class GaitConfig:
    """Parameters of the creeping gait (angles in radians)."""

    stride: float = 0.10
    lift_height: float = 0.05
    touchdown_threshold: float = np.deg2rad(2.0)
    swing_duration: float = 0.8
    torso_duration: float = 2.0
    dwell: float = 0.3
    settle_tol: float = np.deg2rad(1.0)
    stage_timeout: float = 6.0
    cycles: int = 5
    feedback_planning: bool = False
    replan_gain: float = 0.6             # fraction of the fitted slip countered
    stance_hip_pitch: float = np.deg2rad(-16.0)
    stance_knee_pitch: float = np.deg2rad(60.0)


@dataclass
class GaitState:
    """Planner bookkeeping; advanced in place by GaitPlanner.step."""

    phase: str = "stand"                 # stand | lift | torso
    stage: str | None = None             # to_intermediate | lowering
    leg: int | None = None
    cursor: int = 0                      # position in the cycle sequence
    cycle: int = 0
    footholds: np.ndarray = field(default_factory=lambda: np.zeros((4, 2)))
    torso_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    phase_start: float = 0.0
    anchor_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    anchor_yaw: float = 0.0
    anchor_pos: np.ndarray | None = None     # fitted pose used for fresh IK
    anchor_rot: np.ndarray | None = None     # (feedback planning only)
    swing_from: np.ndarray | None = None     # (4,) joint ramp endpoints for
    swing_goal: np.ndarray | None = None     # the active swing leg
    torso_from: np.ndarray = field(default_factory=lambda: np.zeros(2))
    torso_from_yaw: float = 0.0
    done: bool = False


@dataclass
class GaitCommand:
    joint_targets: np.ndarray            # (16,)
    contact_legs: tuple[int, ...]
    lifted_leg: int | None
    phase: str
    stage: str | None
    torso_target: np.ndarray             # (3,) planned world torso position
    touchdown: bool
    done: bool


def stance_joint_targets(desc: RobotDescription, cfg: GaitConfig) -> np.ndarray:
    q = np.zeros(desc.n_joints)
    for leg in range(desc.n_legs):
        q[4 * leg + 1] = cfg.stance_hip_pitch
        q[4 * leg + 3] = cfg.stance_knee_pitch
    return q


def stance_foot_drop(desc: RobotDescription, cfg: GaitConfig) -> float:
    """Vertical distance from the hip plane down to the foot centers."""
    hp, kp = cfg.stance_hip_pitch, cfg.stance_knee_pitch
    return desc.link_length * (np.sin(hp) + np.sin(hp + kp))


def stance_base_height(desc: RobotDescription, cfg: GaitConfig) -> float:
    """Torso height with the feet resting on flat ground."""
    return stance_foot_drop(desc, cfg) + desc.foot_radius


def nominal_footholds(desc: RobotDescription, cfg: GaitConfig,
                      torso_xy: np.ndarray) -> np.ndarray:
    """World-frame xy of all four feet in the stance pose, shape (4, 2)."""
    hp, kp = cfg.stance_hip_pitch, cfg.stance_knee_pitch
    radial = desc.torso_half_width + desc.link_length * (
        np.cos(hp) + np.cos(hp + kp))
    out = np.zeros((desc.n_legs, 2))
    for leg in range(desc.n_legs):
        alpha = desc.leg_angles[leg]
        out[leg] = np.asarray(torso_xy) + radial * np.array(
            [np.cos(alpha), np.sin(alpha)])
    return out


# cycle order per the creeping gait: both front legs, torso shift, both rears
_SEQUENCE: tuple[tuple[str, int | None], ...] = (
    ("lift", 0), ("lift", 1), ("torso", None), ("lift", 2), ("lift", 3))


class GaitPlanner:
    """Stateful creeping-gait sequencer.

    Calling step(state, t) returns the joint targets, declared contact set
    and planned torso pose for that instant, advancing the internal phase
    machine on settle/touchdown events. Stride direction is +x.

    Planted legs hold their last commanded targets; only the swing leg (at
    lift-stage entries) and the torso-shift interpolation write new ones.
    With feedback planning the fresh targets are expressed against the
    measured base pose instead of the planned one, so world-frame foothold
    and torso goals absorb accumulated drift one stage at a time without
    ever re-targeting a planted foot.
    """

    def __init__(self, desc: RobotDescription, cfg: GaitConfig | None = None,
                 torso_xy: np.ndarray | None = None, start_time: float = 0.0):
        self.desc = desc
        self.cfg = cfg or GaitConfig()
        xy = np.zeros(2) if torso_xy is None else np.asarray(torso_xy, float)
        self.base_height = stance_base_height(desc, self.cfg)
        self.gait = GaitState(
            footholds=nominal_footholds(desc, self.cfg, xy),
            torso_xy=xy.copy(),
            phase_start=start_time,
            anchor_xy=xy.copy(),
        )
        self._targets = stance_joint_targets(desc, self.cfg)
        self._now = start_time

    # -- planning helpers ---------------------------------------------------

    def _anchor(self) -> tuple[np.ndarray, float]:
        """Base pose fresh IK targets are computed against."""
        g = self.gait
        if self.cfg.feedback_planning:
            return g.anchor_xy, g.anchor_yaw
        return g.torso_xy, 0.0

    def _reanchor(self, state: RobotState) -> None:
        """Fit the accumulated plan-to-ground drift from the planted feet.

        The base itself sways centimetres on leg compliance as load shifts,
        so anchoring fresh IK to the instantaneous base pose would chase
        elastic deflection that is thirty times larger than the slip it is
        meant to correct. The planted feet are static on the ground: a rigid
        xy fit of the planned foothold pattern onto the measured foot
        positions isolates the real translation + yaw slip and yields the
        pose the base settles into once joint tracking catches up.

        Only ``replan_gain`` of the fitted slip is countered. Placing a foot
        against the full fit stretches the stance, and the stretch later
        relaxes through fresh slip in the same direction, so the effective
        loop gain exceeds one and the corrected runs ring past the plan.
        """
        if not self.cfg.feedback_planning:
            return
        g = self.gait
        feet = forward_kinematics(self.desc, state).foot_pos_world()
        legs = [i for i in range(self.desc.n_legs)
                if not (g.phase == "lift" and i == g.leg)]
        plan = np.array([g.footholds[i] for i in legs])
        meas = feet[legs][:, :2]
        dp = plan - plan.mean(axis=0)
        dm = meas - meas.mean(axis=0)
        cross = dp[:, 0] * dm[:, 1] - dp[:, 1] * dm[:, 0]
        psi = float(np.arctan2(cross.sum(), (dp * dm).sum()))
        shift = meas.mean(axis=0) - rot_z(psi)[:2, :2] @ plan.mean(axis=0)
        fit_xy = rot_z(psi)[:2, :2] @ g.torso_xy + shift
        gain = self.cfg.replan_gain
        g.anchor_yaw = gain * psi
        g.anchor_xy = g.torso_xy + gain * (fit_xy - g.torso_xy)
        g.anchor_pos = np.array([g.anchor_xy[0], g.anchor_xy[1],
                                 self.base_height])
        g.anchor_rot = rot_z(g.anchor_yaw)

    def _ik_target(self, foothold_xy: np.ndarray, height: float,
                   base_xy: np.ndarray, base_yaw: float) -> np.ndarray:
        world = np.array([foothold_xy[0], foothold_xy[1], height])
        base = np.array([base_xy[0], base_xy[1], self.base_height])
        return rot_z(base_yaw).T @ (world - base)

    def _reachable(self, leg: int, target: np.ndarray) -> np.ndarray:
        """Pull a base-frame foot target inside the leg's reach sphere.

        Drift corrections can ask for slightly more extension than the two
        links provide; placing the foot at the boundary and catching up next
        cycle beats aborting the gait.
        """
        alpha = self.desc.leg_angles[leg]
        hip = self.desc.torso_half_width * np.array(
            [np.cos(alpha), np.sin(alpha), 0.0])
        d = target - hip
        r = float(np.linalg.norm(d))
        r_max = 2.0 * self.desc.link_length - 1e-4
        if r > r_max:
            d = d * (r_max / r)
        return hip + d

    def _leg_joint_targets(self, leg: int, height: float,
                           base_xy: np.ndarray, base_yaw: float,
                           foothold_xy: np.ndarray | None = None) -> tuple:
        if foothold_xy is None:
            foothold_xy = self.gait.footholds[leg]
        target = self._ik_target(foothold_xy, height, base_xy, base_yaw)
        q_yaw, q_hip, q_knee = leg_ik(self.desc, leg,
                                      self._reachable(leg, target))
        return q_yaw, q_hip, 0.0, q_knee

    def _set_swing_targets(self, leg: int, stage: str) -> None:
        """Start a joint-space ramp of the swing leg toward fresh IK."""
        height = self.desc.foot_radius
        if stage == "to_intermediate":
            height += self.cfg.lift_height
        g = self.gait
        if self.cfg.feedback_planning and g.anchor_pos is not None:
            # Place against the fitted pose rather than a level plan frame.
            hold = g.footholds[leg]
            world = np.array([hold[0], hold[1], height])
            target = self._reachable(leg, g.anchor_rot.T @ (world - g.anchor_pos))
            q_yaw, q_hip, q_knee = leg_ik(self.desc, leg, target)
            goal = (q_yaw, q_hip, 0.0, q_knee)
        else:
            base_xy, base_yaw = self._anchor()
            goal = self._leg_joint_targets(leg, height, base_xy, base_yaw)
        g.swing_from = self._targets[4 * leg:4 * leg + 4].copy()
        g.swing_goal = np.array(goal)

    def _swing_interp(self) -> None:
        g, cfg = self.gait, self.cfg
        frac = np.clip((self._now - g.phase_start) / cfg.swing_duration,
                       0.0, 1.0)
        block = slice(4 * g.leg, 4 * g.leg + 4)
        self._targets[block] = (1.0 - frac) * g.swing_from + frac * g.swing_goal

    def _torso_interp(self) -> tuple[np.ndarray, float]:
        g, cfg = self.gait, self.cfg
        frac = np.clip((self._now - g.phase_start) / cfg.torso_duration,
                       0.0, 1.0)
        goal = g.torso_xy + np.array([cfg.stride, 0.0])
        xy = (1.0 - frac) * g.torso_from + frac * goal
        yaw = (1.0 - frac) * g.torso_from_yaw
        return xy, yaw

    def _set_torso_targets(self) -> np.ndarray:
        """Drag all four planted legs along the torso-shift plan."""
        xy, yaw = self._torso_interp()
        for leg in range(self.desc.n_legs):
            self._targets[4 * leg:4 * leg + 4] = self._leg_joint_targets(
                leg, self.desc.foot_radius, xy, yaw)
        return xy

    # -- phase machine ------------------------------------------------------

    def _enter(self, state: RobotState, t: float, phase: str,
               stage: str | None = None, leg: int | None = None) -> None:
        g = self.gait
        g.phase, g.stage, g.leg, g.phase_start = phase, stage, leg, t
        self._reanchor(state)
        if phase == "torso":
            base_xy, base_yaw = self._anchor()
            g.torso_from = np.asarray(base_xy, float).copy()
            g.torso_from_yaw = float(base_yaw)
        if phase == "lift" and stage == "to_intermediate":
            g.footholds[leg] = g.footholds[leg] + np.array([self.cfg.stride, 0.0])
            self._set_swing_targets(leg, stage)

    def _advance_cursor(self, state: RobotState, t: float) -> None:
        g = self.gait
        g.cursor += 1
        if g.cursor >= len(_SEQUENCE):
            g.cursor = 0
            g.cycle += 1
            if g.cycle >= self.cfg.cycles:
                g.done = True

    def _settled(self, state: RobotState,
                 joints: slice | None = None) -> bool:
        err = np.abs(self._targets - state.joint_angles)
        if joints is not None:
            err = err[joints]
        return bool(np.max(err) < self.cfg.settle_tol)

    def step(self, state: RobotState, t: float) -> GaitCommand:
        g, cfg = self.gait, self.cfg
        self._now = t
        touchdown = False

        if not g.done and g.phase == "torso":
            self._set_torso_targets()
        if not g.done and g.phase == "lift":
            self._swing_interp()

        if not g.done:
            if g.phase == "stand":
                if (t - g.phase_start >= cfg.dwell
                        and self._settled(state)):
                    phase, leg = _SEQUENCE[g.cursor]
                    stage = "to_intermediate" if phase == "lift" else None
                    self._enter(state, t, phase, stage, leg)
                    if phase == "torso":
                        self._set_torso_targets()
            elif g.phase == "lift" and g.stage == "to_intermediate":
                ramped = t - g.phase_start >= cfg.swing_duration
                timeout = t - g.phase_start >= cfg.stage_timeout
                if (ramped and self._settled(
                        state, self.desc.leg_joints(g.leg))) or timeout:
                    g.stage = "lowering"
                    g.phase_start = t
                    # refit drift from the three planted feet so the
                    # touchdown target reflects slip during the lift stage
                    self._reanchor(state)
                    self._set_swing_targets(g.leg, "lowering")
            elif g.phase == "lift" and g.stage == "lowering":
                timeout = t - g.phase_start >= cfg.stage_timeout
                if touchdown_detect(float(g.swing_goal[1]),
                                    state.joint_angles[4 * g.leg + 1],
                                    cfg.touchdown_threshold) or timeout:
                    touchdown = True
                    self._targets[4 * g.leg:4 * g.leg + 4] = g.swing_goal
                    self._advance_cursor(state, t)
                    self._enter(state, t, "stand")
            elif g.phase == "torso":
                done_move = t - g.phase_start >= cfg.torso_duration
                if done_move and self._settled(state):
                    g.torso_xy = g.torso_xy + np.array([cfg.stride, 0.0])
                    self._advance_cursor(state, t)
                    self._enter(state, t, "stand")
            else:  # pragma: no cover - unreachable phase combination
                raise RuntimeError(f"bad gait phase {g.phase}/{g.stage}")

        lifted = g.leg if g.phase == "lift" else None
        contacts = tuple(k for k in range(self.desc.n_legs) if k != lifted)
        torso = (self._torso_interp()[0] if g.phase == "torso"
                 else g.torso_xy)
        return GaitCommand(
            joint_targets=self._targets.copy(),
            contact_legs=contacts,
            lifted_leg=lifted,
            phase=g.phase,
            stage=g.stage if g.phase == "lift" else None,
            torso_target=np.array([torso[0], torso[1], self.base_height]),
            touchdown=touchdown,
            done=g.done,
        )
