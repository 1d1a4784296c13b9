"""Quasi-static wrench allocation over link-frame thrust forces.

Given a desired CoG wrench, the allocator distributes it over the eight
thrust units while choosing joint torques and (in stance) contact forces that
keep every joint in quasi-static equilibrium. Decision vector:

    x = [f'_0 .. f'_7  |  tau_0 .. tau_15  |  f_c per standing leg]

minimizing  w1 * sum ||f'_i||^2 + w2 * ||tau||^2  subject to

  * the stacked wrench map equals the desired wrench (6 rows),
  * joint equilibrium: tau + J_c^T R^T f_c + J_r^T R_L f' + gravity load = 0
    (16 rows; world-frame quantities rotated into base axes before the
    Jacobian-transpose pairing),
  * per-component thrust box |f'| <= max_thrust / sqrt(3) (which inscribes
    the magnitude ball), joint torque box, and non-negative vertical contact
    force per standing foot.

Aerial mode is the same problem with zero contact columns.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import thrust as thrust_mod
from .model import FrameSet, RobotDescription, jacobian
from .qp import QPResult, solve_qp
from .thrust import RefineResult, RotorCommand

GRAVITY_DEFAULT = np.array([0.0, 0.0, -9.8])


class AllocationError(RuntimeError):
    """The allocation QP has no feasible point for the requested wrench."""

    def __init__(self, message: str, result: "AllocationSolution | None" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class AllocationWeights:
    """Objective weights; torque weight zero is the aerial tuning.

    A tiny curvature proportional to (thrust + torque) is added to otherwise
    weightless variables so the Hessian stays positive definite; scaling both
    weights by a common factor therefore still rescales the whole objective
    and leaves the minimizer unchanged.
    """

    thrust: float = 1.0
    torque: float = 1.0
    regularization: float = 1e-9

    def __post_init__(self) -> None:
        if self.thrust <= 0.0:
            raise ValueError("thrust weight must be positive")
        if self.torque < 0.0:
            raise ValueError("torque weight must be non-negative")


@dataclass
class QPProblem:
    """Assembled allocation QP plus the index bookkeeping to read solutions."""

    h: np.ndarray
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_in: np.ndarray
    b_in: np.ndarray
    contact_legs: tuple[int, ...]
    n_rotors: int
    n_joints: int
    thrust_box: np.ndarray          # per-rotor component bound, shape (8,)
    weights: AllocationWeights
    wrench_des: np.ndarray
    blocks: np.ndarray              # (8, 6, 3) link-force wrench blocks

    @property
    def n_vars(self) -> int:
        return self.h.shape[0]

    def force_slice(self) -> slice:
        return slice(0, 3 * self.n_rotors)

    def torque_slice(self) -> slice:
        return slice(3 * self.n_rotors, 3 * self.n_rotors + self.n_joints)

    def contact_slice(self) -> slice:
        return slice(3 * self.n_rotors + self.n_joints, self.n_vars)


@dataclass
class AllocationSolution:
    link_forces: np.ndarray                 # (8, 3) in each link frame
    joint_torques: np.ndarray               # (16,)
    contact_forces: np.ndarray              # (n_contacts, 3), world frame
    contact_legs: tuple[int, ...]
    status: str
    objective: float
    iterations: int
    solve_time: float
    wrench_residual: float
    equilibrium_residual: float
    active: tuple[int, ...] = ()
    most_violated: tuple[int, float] | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class AllocationResult:
    """Full pipeline output: QP solution plus vectoring commands."""

    commands: list[RotorCommand]
    link_forces: np.ndarray
    joint_torques: np.ndarray
    contact_forces: np.ndarray
    contact_legs: tuple[int, ...]
    qp: AllocationSolution
    refine: RefineResult | None
    wrench_target: np.ndarray
    degenerate_rotors: tuple[int, ...] = ()
    clipped_rotors: tuple[int, ...] = ()


def build_qp(desc: RobotDescription, frames: FrameSet, wrench_des: np.ndarray,
             contact_legs: tuple[int, ...] = (),
             weights: AllocationWeights | None = None,
             gravity: np.ndarray = GRAVITY_DEFAULT,
             torque_limit: float | None = None,
             thrust_box: float | None = None) -> QPProblem:
    """Assemble the allocation QP for one control tick.

    ``contact_legs`` must name distinct legs; zero, three or four of them
    (free flight, one leg swinging, full stance).
    """
    wrench_des = np.asarray(wrench_des, dtype=float)
    if wrench_des.shape != (6,):
        raise ValueError("wrench_des must be a 6-vector")
    contact_legs = tuple(contact_legs)
    if len(set(contact_legs)) != len(contact_legs) or not set(contact_legs) <= set(
        range(desc.n_legs)
    ):
        raise ValueError(f"invalid contact legs {contact_legs}")
    if len(contact_legs) not in (0, 3, 4):
        raise ValueError("contact count must be 0, 3 or 4")
    weights = weights or AllocationWeights()
    torque_limit = desc.max_joint_torque if torque_limit is None else float(torque_limit)
    box = desc.max_thrust / np.sqrt(3.0) if thrust_box is None else float(thrust_box)

    nr, nj, nc = desc.n_rotors, desc.n_joints, len(contact_legs)
    nf = 3 * nr
    n = nf + nj + 3 * nc
    rot = frames.base_rotation

    scale = weights.thrust + weights.torque
    h = np.zeros(n)
    h[:nf] = 2.0 * weights.thrust
    h[nf:nf + nj] = 2.0 * (weights.torque + weights.regularization * scale)
    h[nf + nj:] = 2.0 * weights.regularization * scale
    h = np.diag(h)
    c = np.zeros(n)

    blocks = thrust_mod.force_blocks(frames)
    a_eq = np.zeros((6 + nj, n))
    b_eq = np.zeros(6 + nj)
    for i in range(nr):
        a_eq[:6, 3 * i:3 * i + 3] = blocks[i]
    b_eq[:6] = wrench_des

    eq = a_eq[6:]
    eq[:, nf:nf + nj] = np.eye(nj)
    for i in range(nr):
        j_r = jacobian(desc, frames, "rotor", i)
        eq[:, 3 * i:3 * i + 3] = j_r.T @ frames.link_rot[i]
    for k, leg in enumerate(contact_legs):
        j_c = jacobian(desc, frames, "foot", leg)
        eq[:, nf + nj + 3 * k:nf + nj + 3 * k + 3] = j_c.T @ rot.T
    load = np.zeros(nj)
    for s in range(desc.n_segments):
        j_s = jacobian(desc, frames, "segment", s)
        load += j_s.T @ (rot.T @ (frames.seg_mass[s] * gravity))
    b_eq[6:] = -load

    rows, rhs = [], []
    for idx in range(nf):
        e = np.zeros(n)
        e[idx] = 1.0
        rows += [e, -e]
        rhs += [-box, -box]
    for idx in range(nf, nf + nj):
        e = np.zeros(n)
        e[idx] = 1.0
        rows += [e, -e]
        rhs += [-torque_limit, -torque_limit]
    for k in range(nc):
        e = np.zeros(n)
        e[nf + nj + 3 * k + 2] = 1.0
        rows.append(e)
        rhs.append(0.0)

    return QPProblem(
        h=h, c=c, a_eq=a_eq, b_eq=b_eq,
        a_in=np.array(rows), b_in=np.array(rhs),
        contact_legs=contact_legs, n_rotors=nr, n_joints=nj,
        thrust_box=np.full(nr, box), weights=weights,
        wrench_des=wrench_des, blocks=blocks,
    )


def _shrink_box(problem: QPProblem, rotor: int, factor: float) -> None:
    problem.thrust_box[rotor] *= factor
    base = 6 * rotor  # two rows per f' component, three components per rotor
    problem.b_in[base:base + 6] *= factor


def solve_allocation(desc: RobotDescription, problem: QPProblem,
                     prefer: tuple[int, ...] = ()) -> AllocationSolution:
    """Solve the assembled QP and unpack; one re-solve if a thrust magnitude
    escapes the ball (possible only when the box over-inscribes it)."""
    started = time.perf_counter()
    result = solve_qp(problem.h, problem.c, problem.a_eq, problem.b_eq,
                      problem.a_in, problem.b_in, prefer=prefer)
    solution = _unpack(desc, problem, result, time.perf_counter() - started)
    if not solution.optimal:
        return solution

    norms = np.linalg.norm(solution.link_forces, axis=1)
    worst = int(np.argmax(norms))
    if norms[worst] > desc.max_thrust * (1.0 + 1e-9):
        _shrink_box(problem, worst, desc.max_thrust / norms[worst])
        result = solve_qp(problem.h, problem.c, problem.a_eq, problem.b_eq,
                          problem.a_in, problem.b_in, prefer=prefer)
        solution = _unpack(desc, problem, result, time.perf_counter() - started)
    return solution


def _unpack(desc: RobotDescription, problem: QPProblem, result: QPResult,
            elapsed: float) -> AllocationSolution:
    x = result.x
    forces = x[problem.force_slice()].reshape(desc.n_rotors, 3)
    torques = x[problem.torque_slice()]
    contacts = x[problem.contact_slice()].reshape(len(problem.contact_legs), 3)
    wrench_res = float(
        np.abs(problem.a_eq[:6] @ x - problem.b_eq[:6]).max()
    )
    equil_res = float(np.abs(problem.a_eq[6:] @ x - problem.b_eq[6:]).max())
    w = problem.weights
    objective = float(w.thrust * (forces**2).sum() + w.torque * (torques**2).sum())
    return AllocationSolution(
        link_forces=forces,
        joint_torques=torques,
        contact_forces=contacts,
        contact_legs=problem.contact_legs,
        status=result.status,
        objective=objective,
        iterations=result.iterations,
        solve_time=elapsed,
        wrench_residual=wrench_res,
        equilibrium_residual=equil_res,
        active=tuple(result.active),
        most_violated=result.most_violated,
    )


def allocate(desc: RobotDescription, frames: FrameSet, wrench_des: np.ndarray,
             contact_legs: tuple[int, ...] = (),
             weights: AllocationWeights | None = None,
             gravity: np.ndarray = GRAVITY_DEFAULT,
             torque_limit: float | None = None,
             extra_link_forces: np.ndarray | None = None,
             hold_roll: np.ndarray | None = None,
             hold_pitch: np.ndarray | None = None,
             prefer: tuple[int, ...] = (),
             refine: bool = True,
             refine_iters: int = 50,
             refine_tol: float = 1e-6) -> AllocationResult:
    """Full allocation pipeline: QP, optional post-QP force injection,
    offset-aware refinement, then angle extraction.

    ``extra_link_forces`` (8x3) is added after the QP (used by the terrestrial
    altitude trim); the refinement target is shifted by the wrench those extra
    forces produce, so the combined command still realizes a consistent
    wrench. Rotors whose force drops below the degenerate threshold keep the
    hold angles (pass the currently measured vectoring angles); thrust
    magnitudes are clipped into [0, max_thrust] and reported.

    Raises AllocationError when the QP is infeasible or hits its iteration
    guard; the partial solution rides on the exception for diagnosis.
    """
    problem = build_qp(desc, frames, wrench_des, contact_legs, weights, gravity,
                       torque_limit)
    solution = solve_allocation(desc, problem, prefer=prefer)
    if not solution.optimal:
        detail = ""
        if solution.most_violated is not None:
            detail = (f" (constraint {solution.most_violated[0]} short by "
                      f"{solution.most_violated[1]:.3g})")
        raise AllocationError(
            f"allocation {solution.status} for wrench {np.array2string(wrench_des, precision=2)}"
            f"{detail}",
            solution,
        )

    forces = solution.link_forces.copy()
    target = wrench_des.astype(float).copy()
    if extra_link_forces is not None:
        extra = np.asarray(extra_link_forces, dtype=float)
        forces += extra
        for i in range(desc.n_rotors):
            target += problem.blocks[i] @ extra[i]

    refine_info: RefineResult | None = None
    if refine:
        forces, refine_info = thrust_mod.refine_allocation(
            desc, frames, target, forces, max_iters=refine_iters, tol=refine_tol
        )

    hold_roll = np.zeros(desc.n_rotors) if hold_roll is None else hold_roll
    hold_pitch = np.zeros(desc.n_rotors) if hold_pitch is None else hold_pitch
    commands: list[RotorCommand] = []
    degenerate: list[int] = []
    clipped: list[int] = []
    for i in range(desc.n_rotors):
        try:
            lam, roll, pitch = thrust_mod.extract_angles(forces[i])
            lam, roll, pitch = float(lam), float(roll), float(pitch)
        except thrust_mod.DegenerateThrustError:
            degenerate.append(i)
            lam = float(np.linalg.norm(forces[i]))
            roll, pitch = float(hold_roll[i]), float(hold_pitch[i])
        if lam > desc.max_thrust:
            clipped.append(i)
            lam = desc.max_thrust
        commands.append(RotorCommand(lam, roll, pitch))

    return AllocationResult(
        commands=commands,
        link_forces=forces,
        joint_torques=solution.joint_torques,
        contact_forces=solution.contact_forces,
        contact_legs=contact_legs,
        qp=solution,
        refine=refine_info,
        wrench_target=target,
        degenerate_rotors=tuple(degenerate),
        clipped_rotors=tuple(clipped),
    )


def gravity_wrench(desc: RobotDescription, gravity: np.ndarray = GRAVITY_DEFAULT
                   ) -> np.ndarray:
    """Pure weight-cancelling wrench in body axes for a level base."""
    w = np.zeros(6)
    w[:3] = -desc.total_mass * np.asarray(gravity)
    return w
