"""Active-set QP solver: analytic cases, KKT certificates and a cross-check
against cvxopt when that solver is installed."""
import numpy as np
import pytest

from vectorquad.qp import QPResult, _kkt_solve, solve_qp


def _random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


def _check_kkt(h, c, a_eq, b_eq, a_in, b_in, res, tol=1e-7):
    """Certify optimality from the returned primal/dual pair alone."""
    x = res.x
    if a_eq is not None:
        np.testing.assert_allclose(a_eq @ x, b_eq, atol=tol)
    if a_in is not None and len(a_in):
        slack = a_in @ x - b_in
        assert slack.min() > -tol, f"primal infeasible by {-slack.min():.2e}"
        mu = res.duals_in
        assert mu.min() > -tol, "negative inequality multiplier"
        assert np.abs(mu * slack).max() < tol, "complementary slackness"
    grad = h @ x + c
    if a_eq is not None:
        grad = grad - a_eq.T @ res.duals_eq
    if a_in is not None and len(a_in):
        grad = grad - a_in.T @ res.duals_in
    np.testing.assert_allclose(grad, np.zeros_like(grad), atol=tol)


def test_unconstrained_matches_linear_solve():
    rng = np.random.default_rng(40)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        h = _random_spd(rng, n)
        c = rng.normal(size=n)
        res = solve_qp(h, c)
        assert res.optimal and res.iterations == 0
        np.testing.assert_allclose(res.x, np.linalg.solve(h, -c), atol=1e-9)


def test_equality_constrained_matches_block_solve():
    rng = np.random.default_rng(41)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        m = int(rng.integers(1, n))
        h = _random_spd(rng, n)
        c = rng.normal(size=n)
        a = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        res = solve_qp(h, c, a_eq=a, b_eq=b)
        assert res.optimal
        # independent dense KKT assembly
        kkt = np.block([[h, a.T], [a, np.zeros((m, m))]])
        sol = np.linalg.solve(kkt, np.concatenate([-c, b]))
        np.testing.assert_allclose(res.x, sol[:n], atol=1e-8)


def test_scalar_lower_bound_closed_form():
    # min 0.5 x^2 - c x  s.t.  x >= b   ->   x* = max(c, b)
    rng = np.random.default_rng(42)
    for _ in range(50):
        c = rng.normal() * 3.0
        b = rng.normal() * 3.0
        res = solve_qp(np.array([[1.0]]), np.array([-c]),
                       a_in=np.array([[1.0]]), b_in=np.array([b]))
        assert res.optimal
        assert res.x[0] == pytest.approx(max(c, b), abs=1e-10)
        if b > c:
            assert res.active == [0]


def test_box_projection():
    # H = I, c = -p: solution is the projection of p onto the box [lo, hi]
    rng = np.random.default_rng(43)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        p = rng.normal(size=n) * 2.0
        lo = rng.uniform(-1.5, -0.5, n)
        hi = rng.uniform(0.5, 1.5, n)
        a_in = np.vstack([np.eye(n), -np.eye(n)])
        b_in = np.concatenate([lo, -hi])
        res = solve_qp(np.eye(n), -p, a_in=a_in, b_in=b_in)
        assert res.optimal
        np.testing.assert_allclose(res.x, np.clip(p, lo, hi), atol=1e-9)


def test_random_problems_satisfy_kkt():
    rng = np.random.default_rng(44)
    for _ in range(60):
        n = int(rng.integers(3, 12))
        me = int(rng.integers(0, max(1, n // 2)))
        mi = int(rng.integers(1, 2 * n))
        h = _random_spd(rng, n)
        c = rng.normal(size=n)
        a_eq = rng.normal(size=(me, n)) if me else None
        a_in = rng.normal(size=(mi, n))
        # keep a known interior-ish point feasible so the problem is solvable
        x_feas = rng.normal(size=n) * 0.3
        b_eq = a_eq @ x_feas if me else None
        b_in = a_in @ x_feas - rng.uniform(0.0, 1.0, mi)
        res = solve_qp(h, c, a_eq, b_eq, a_in, b_in)
        assert res.optimal, res.status
        _check_kkt(h, c, a_eq, b_eq, a_in, b_in, res)


def test_cross_check_against_cvxopt():
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    solvers.options["show_progress"] = False
    rng = np.random.default_rng(45)
    for _ in range(25):
        n = int(rng.integers(3, 10))
        mi = int(rng.integers(2, 2 * n))
        me = int(rng.integers(0, 3))
        h = _random_spd(rng, n)
        c = rng.normal(size=n)
        x_feas = rng.normal(size=n) * 0.3
        a_in = rng.normal(size=(mi, n))
        b_in = a_in @ x_feas - rng.uniform(0.1, 1.0, mi)
        a_eq = rng.normal(size=(me, n)) if me else None
        b_eq = a_eq @ x_feas if me else None

        res = solve_qp(h, c, a_eq, b_eq, a_in, b_in)
        assert res.optimal

        kwargs = {}
        if me:
            kwargs = {"A": matrix(a_eq), "b": matrix(b_eq)}
        ref = solvers.qp(matrix(h), matrix(c), matrix(-a_in), matrix(-b_in),
                         **kwargs)
        assert ref["status"] == "optimal"
        x_ref = np.array(ref["x"]).ravel()
        obj = 0.5 * res.x @ h @ res.x + c @ res.x
        obj_ref = 0.5 * x_ref @ h @ x_ref + c @ x_ref
        assert obj == pytest.approx(obj_ref, abs=1e-6)
        np.testing.assert_allclose(res.x, x_ref, atol=1e-4)


def test_infeasible_problem_is_reported():
    # x >= 1 and -x >= 0 cannot both hold
    res = solve_qp(np.array([[1.0]]), np.zeros(1),
                   a_in=np.array([[1.0], [-1.0]]), b_in=np.array([1.0, 0.0]))
    assert res.status == "infeasible"
    assert not res.optimal
    assert res.most_violated is not None
    idx, gap = res.most_violated
    assert idx in (0, 1) and gap > 0.5


def test_prefer_reproduces_solution():
    rng = np.random.default_rng(46)
    n = 8
    h = _random_spd(rng, n)
    c = rng.normal(size=n)
    a_in = np.vstack([np.eye(n), -np.eye(n)])
    b_in = np.concatenate([np.full(n, -0.2), np.full(n, -0.2)])
    cold = solve_qp(h, c, a_in=a_in, b_in=b_in)
    warm = solve_qp(h, c, a_in=a_in, b_in=b_in, prefer=tuple(cold.active))
    assert cold.optimal and warm.optimal
    np.testing.assert_allclose(warm.x, cold.x, atol=1e-9)
    assert sorted(warm.active) == sorted(cold.active)


def test_kkt_solve_reduces_to_plain_solve():
    rng = np.random.default_rng(47)
    h = _random_spd(rng, 5)
    g = rng.normal(size=5)
    x, y = _kkt_solve(h, np.zeros((0, 5)), g, np.zeros(0))
    np.testing.assert_allclose(x, np.linalg.solve(h, g), atol=1e-10)
    assert y.size == 0


def test_result_dataclass_flags():
    res = QPResult(x=np.zeros(1), status="optimal", objective=0.0, iterations=0)
    assert res.optimal
    res2 = QPResult(x=np.zeros(1), status="infeasible", objective=0.0,
                    iterations=3)
    assert not res2.optimal
