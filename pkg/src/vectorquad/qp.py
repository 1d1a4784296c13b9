"""Dense active-set solver for small strictly convex quadratic programs.

    minimize    0.5 x^T H x + c^T x
    subject to  A_eq x  = b_eq
                A_in x >= b_in

The method is the dual active-set scheme of Goldfarb-Idnani flavor: start at
the equality-constrained stationary point, repeatedly pick a violated
inequality, and drive its multiplier up while stepping the primal point along
the corresponding KKT direction, dropping active constraints whose
multipliers would go negative. No feasible starting point or phase-1 is
needed, and every working-set change costs one dense KKT solve, which is the
right trade at the few-dozen-variable sizes this package produces.

H must be positive definite and the equality rows independent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QPResult:
    x: np.ndarray
    status: str                      # "optimal" | "infeasible" | "iteration_limit"
    objective: float
    iterations: int
    active: list[int] = field(default_factory=list)
    duals_eq: np.ndarray | None = None
    duals_in: np.ndarray | None = None
    most_violated: tuple[int, float] | None = None  # set when infeasible

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _kkt_solve(h: np.ndarray, rows: np.ndarray, g: np.ndarray, rhs: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """Solve [[H, C^T], [C, 0]] [x, y] = [g, rhs]."""
    m = rows.shape[0]
    if m == 0:
        return np.linalg.solve(h, g), np.zeros(0)
    n = h.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = h
    kkt[:n, n:] = rows.T
    kkt[n:, :n] = rows
    full_rhs = np.concatenate([g, rhs])
    try:
        sol = np.linalg.solve(kkt, full_rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, full_rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def solve_qp(h: np.ndarray, c: np.ndarray,
             a_eq: np.ndarray | None = None, b_eq: np.ndarray | None = None,
             a_in: np.ndarray | None = None, b_in: np.ndarray | None = None,
             feas_tol: float = 1e-10, max_iter: int | None = None,
             prefer: tuple[int, ...] = ()) -> QPResult:
    """Solve the QP; ``prefer`` biases the working-set search order.

    ``prefer`` (typically the active set of the previous, similar problem)
    is scanned first when choosing which violated inequality to process,
    which keeps the working-set path short across warm sequences.
    """
    h = np.asarray(h, dtype=float)
    c = np.asarray(c, dtype=float)
    n = h.shape[0]
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    a_in = np.zeros((0, n)) if a_in is None else np.asarray(a_in, dtype=float)
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float)
    me, mi = a_eq.shape[0], a_in.shape[0]
    if max_iter is None:
        max_iter = 25 * (n + me + mi) + 50

    def objective(x: np.ndarray) -> float:
        return float(0.5 * x @ h @ x + c @ x)

    # stationary point subject to the equalities only
    x, y = _kkt_solve(h, a_eq, -c, b_eq)
    nu = -y  # equality multipliers in the Hx + c - A^T nu - ... = 0 convention
    active: list[int] = []
    u: list[float] = []
    iterations = 0

    def pick_violated() -> tuple[int, float] | None:
        slack = a_in @ x - b_in if mi else np.zeros(0)
        worst, worst_s = -1, -feas_tol
        for p in prefer:
            if 0 <= p < mi and p not in active and slack[p] < worst_s:
                worst, worst_s = int(p), float(slack[p])
        if worst >= 0:
            return worst, worst_s
        if mi:
            p = int(np.argmin(slack))
            if slack[p] < -feas_tol and p not in active:
                return p, float(slack[p])
        return None

    while iterations < max_iter:
        picked = pick_violated()
        if picked is None:
            duals = np.zeros(mi)
            for k, uk in zip(active, u):
                duals[k] = uk
            return QPResult(x, "optimal", objective(x), iterations,
                            active=list(active), duals_eq=nu, duals_in=duals)
        p, _ = picked
        a_p = a_in[p]
        u_p = 0.0  # multiplier of p, grows at unit rate along the path

        # drive constraint p toward feasibility, dropping blockers as needed
        while iterations < max_iter:
            iterations += 1
            rows = np.vstack([a_eq, a_in[active]]) if (me or active) else np.zeros((0, n))
            z, w = _kkt_solve(h, rows, a_p, np.zeros(rows.shape[0]))
            w_eq, w_act = w[:me], w[me:]
            slack_p = float(a_p @ x - b_in[p])

            # dual blocking step: first active inequality whose multiplier
            # would cross zero (u_k(t) = u_k - t * w_k)
            t_block, blocker = np.inf, -1
            for idx, uk in enumerate(u):
                wk = w_act[idx]
                if wk > 1e-12 and uk / wk < t_block:
                    t_block, blocker = uk / wk, idx

            def advance(t: float) -> None:
                nonlocal nu, u_p
                nu = nu - t * w_eq
                for idx in range(len(active)):
                    u[idx] -= t * w_act[idx]
                u_p += t

            if np.linalg.norm(z) <= 1e-11 * (1.0 + np.linalg.norm(a_p)):
                # a_p is dependent on the working set: only a dual step can help
                if blocker < 0:
                    return QPResult(
                        x, "infeasible", objective(x), iterations,
                        active=list(active), duals_eq=nu,
                        most_violated=(p, -slack_p),
                    )
                advance(t_block)
                active.pop(blocker)
                u.pop(blocker)
                continue

            t_full = -slack_p / float(a_p @ z)
            if t_full <= t_block:
                x = x + t_full * z
                advance(t_full)
                active.append(p)
                u.append(u_p)
                break
            x = x + t_block * z
            advance(t_block)
            active.pop(blocker)
            u.pop(blocker)

    return QPResult(x, "iteration_limit", objective(x), iterations,
                    active=list(active), duals_eq=nu)
