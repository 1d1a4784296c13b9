"""Maps between vectoring commands, link-frame forces and body wrenches.

A thrust unit produces force lam * u where u is the unit z axis of its
gimbal frame, reached from the link frame by a roll about the rod (phi)
followed by a pitch across the rotor pair (theta). Working in the link frame
with the force vector f' = lam * Rx(phi) Ry(theta) z makes the total-wrench
constraint linear, which is what the allocation QP exploits; the angle pair
is recovered afterwards with closed-form atan2 expressions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FrameSet, RobotDescription, rotor_mount
from .rotations import skew

DEGENERATE_THRUST = 1e-3  # N; below this the vectoring direction is unobservable


class DegenerateThrustError(ValueError):
    """Link-frame force too small to define vectoring angles."""


@dataclass
class RotorCommand:
    """Setpoint for one thrust unit: magnitude (N) and vectoring angles (rad)."""

    thrust: float
    roll: float
    pitch: float


@dataclass
class RefineResult:
    converged: bool
    iterations: int
    residual: float


def thrust_direction(roll, pitch) -> np.ndarray:
    """Unit thrust direction in the link frame; broadcasts over inputs.

    Equals Rx(roll) @ Ry(pitch) @ [0, 0, 1].
    """
    roll = np.asarray(roll, dtype=float)
    pitch = np.asarray(pitch, dtype=float)
    return np.stack(
        [
            np.sin(pitch),
            -np.cos(pitch) * np.sin(roll),
            np.cos(pitch) * np.cos(roll),
        ],
        axis=-1,
    )


def link_frame_force(thrust, roll, pitch) -> np.ndarray:
    """Force vector f' in the link frame for given magnitude and angles."""
    return np.asarray(thrust, dtype=float)[..., None] * thrust_direction(roll, pitch)


def extract_angles(force, eps: float = DEGENERATE_THRUST
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Recover (thrust, roll, pitch) from link-frame forces.

    atan2 keeps every quadrant; the pitch denominator equals
    hypot(fy, fz) >= 0, so pitch always lands in [-pi/2, pi/2] and roll in
    (-pi, pi]. Raises DegenerateThrustError if any force magnitude is at or
    below ``eps``; callers that can hold the previous angles should catch it.
    """
    f = np.asarray(force, dtype=float)
    lam = np.linalg.norm(f, axis=-1)
    if np.any(lam <= eps):
        raise DegenerateThrustError(
            f"thrust magnitude {float(np.min(lam)):.2e} N is below {eps:.2e} N"
        )
    roll = np.arctan2(-f[..., 1], f[..., 2])
    pitch = np.arctan2(f[..., 0], np.hypot(f[..., 1], f[..., 2]))
    return lam, roll, pitch


def commands_to_arrays(commands: list[RotorCommand]
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lam = np.array([c.thrust for c in commands])
    roll = np.array([c.roll for c in commands])
    pitch = np.array([c.pitch for c in commands])
    return lam, roll, pitch


def arrays_to_commands(lam: np.ndarray, roll: np.ndarray, pitch: np.ndarray
                       ) -> list[RotorCommand]:
    return [RotorCommand(float(l), float(r), float(p))
            for l, r, p in zip(lam, roll, pitch)]


def unit_vector(frames: FrameSet, rotor: int) -> np.ndarray:
    """Thrust direction u_i of one rotor in CoG axes."""
    return frames.rotor_rot[rotor, :, 2].copy()


def allocation_matrix(frames: FrameSet) -> np.ndarray:
    """6x8 map from per-rotor thrust magnitudes to the CoG wrench.

    Column i stacks (u_i, p_i x u_i) with p_i the thrust origin relative to
    the CoG. Uses the vectoring angles stored in the frame set.
    """
    u = frames.thrust_axes()
    p = frames.rotor_pos_cog()
    return np.vstack([u.T, np.cross(p, u).T])


def force_block(frames: FrameSet, rotor: int) -> np.ndarray:
    """6x3 map from one rotor's link-frame force f' to the CoG wrench."""
    r = frames.link_rot[rotor]
    p = frames.rotor_pos[rotor] - frames.cog
    return np.vstack([r, skew(p) @ r])


def force_blocks(frames: FrameSet) -> np.ndarray:
    """Stacked 6x3 wrench blocks for all rotors, shape (8, 6, 3)."""
    return np.stack([force_block(frames, i) for i in range(frames.link_pos.shape[0])])


def wrench_of_link_forces(desc: RobotDescription, frames: FrameSet,
                          forces: np.ndarray) -> np.ndarray:
    """CoG wrench realized by link-frame forces, re-deriving thrust origins.

    Unlike force_blocks (which freezes the thrust origins at the current
    vectoring roll), this recomputes each origin from the roll implied by the
    force itself, so it reflects what the hardware would actually produce.
    Forces below the degenerate threshold keep the frame-set roll.
    """
    total = np.zeros(6)
    for i in range(desc.n_rotors):
        f = forces[i]
        lam = float(np.linalg.norm(f))
        if lam <= DEGENERATE_THRUST:
            roll = np.arctan2(
                -frames.rotor_rot[i][:, 2][1], frames.rotor_rot[i][:, 2][2]
            )
        else:
            roll = float(np.arctan2(-f[1], f[2]))
        pos, _ = rotor_mount(desc, frames.link_rot[i], frames.link_pos[i], roll, 0.0)
        f_cog = frames.link_rot[i] @ f
        total[:3] += f_cog
        total[3:] += np.cross(pos - frames.cog, f_cog)
    return total


def _blocks_at_forces(desc: RobotDescription, frames: FrameSet,
                      forces: np.ndarray) -> np.ndarray:
    """6x24 wrench map with thrust origins at the rolls implied by forces."""
    cols = []
    for i in range(desc.n_rotors):
        f = forces[i]
        if np.linalg.norm(f) <= DEGENERATE_THRUST:
            pos = frames.rotor_pos[i]
        else:
            roll = float(np.arctan2(-f[1], f[2]))
            pos, _ = rotor_mount(desc, frames.link_rot[i], frames.link_pos[i],
                                 roll, 0.0)
        r = frames.link_rot[i]
        cols.append(np.vstack([r, skew(pos - frames.cog) @ r]))
    return np.hstack(cols)


def refine_allocation(desc: RobotDescription, frames: FrameSet, wrench_target: np.ndarray,
                      forces: np.ndarray, max_iters: int = 50, tol: float = 1e-6
                      ) -> tuple[np.ndarray, RefineResult]:
    """Damped Gauss-Newton correction of link-frame forces.

    The QP treats thrust origins as fixed, but the pitch gimbal is offset from
    the roll axis, so solving for f' and then re-deriving the roll moves every
    origin slightly and perturbs the realized wrench. Each iterate rebuilds
    the wrench map at the origins implied by the current forces, takes the
    least-norm Gauss-Newton step, and accepts it only when the residual
    decreases, so the residual sequence is non-increasing. Returns the refined
    forces and a convergence record.
    """
    f = forces.copy()
    residual = wrench_target - wrench_of_link_forces(desc, frames, f)
    best_norm = float(np.linalg.norm(residual))
    if best_norm <= tol:
        return f, RefineResult(True, 0, best_norm)

    for it in range(1, max_iters + 1):
        blocks = _blocks_at_forces(desc, frames, f)
        step = (np.linalg.pinv(blocks) @ residual).reshape(desc.n_rotors, 3)
        alpha = 1.0
        improved = False
        while alpha >= 1.0 / 64.0:
            trial = f + alpha * step
            trial_res = wrench_target - wrench_of_link_forces(desc, frames, trial)
            trial_norm = float(np.linalg.norm(trial_res))
            if trial_norm < best_norm:
                f, residual, best_norm = trial, trial_res, trial_norm
                improved = True
                break
            alpha *= 0.5
        if best_norm <= tol:
            return f, RefineResult(True, it, best_norm)
        if not improved:
            return f, RefineResult(False, it, best_norm)
    return f, RefineResult(False, max_iters, best_norm)
