import numpy as np
import pytest
from hypothesis import given, strategies as st

from cbfshield.qp import (
    QpInfeasible,
    QpMaxIterations,
    QpProblem,
    QpWorkspace,
    dump_problem,
    inverse_factor,
    kkt_report,
    load_problem_dump,
    solve_qp,
)
from oracles import dual_fista

N = 7
MAX_INEQ = 6


def random_problem(rng, conditioning="mild"):
    """Feasible random problem: constraints are built around a known interior point."""
    if conditioning == "mild":
        M = rng.normal(size=(N, N))
        H = M @ M.T / N + 0.3 * np.eye(N)
        f = rng.normal(size=N) * 2
    else:  # shaped like a filter step: J'J + lam I
        J = rng.normal(size=(6, N)) * 0.5
        H = J.T @ J + 1e-3 * np.eye(N)
        f = -J.T @ rng.normal(size=6) * 0.02
    m = int(rng.integers(0, MAX_INEQ + 1))
    x0 = rng.normal(size=N) * 0.3
    A = rng.normal(size=(m, N))
    b = A @ x0 - rng.uniform(0, 0.5, m)
    lo = x0 - rng.uniform(0.2, 1.5, N)
    hi = x0 + rng.uniform(0.2, 1.5, N)
    if conditioning != "mild":
        b, lo, hi = 0.02 * b, 0.02 * lo, 0.02 * hi
    return QpProblem(H, f, A, b, lo, hi)


def independent_kkt(problem, sol):
    """Recompute the optimality residuals from the raw problem arrays."""
    rows, rhs, names = [], [], []
    for k, (a, b) in enumerate(zip(problem.A, problem.b)):
        rows.append(a), rhs.append(b), names.append(problem.labels[k])
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        if np.isfinite(problem.lo[i]):
            rows.append(e), rhs.append(problem.lo[i]), names.append(f"lo[{i}]")
        if np.isfinite(problem.hi[i]):
            rows.append(-e), rhs.append(-problem.hi[i]), names.append(f"hi[{i}]")
    assert set(sol.multipliers) <= set(names)
    x = sol.x
    grad = problem.H @ x + problem.f
    worst_primal = worst_comp = worst_dual = 0.0
    for a, b, name in zip(rows, rhs, names):
        mu = sol.multipliers.get(name, 0.0)
        grad = grad - mu * a
        s = float(a @ x - b)
        worst_primal = max(worst_primal, -s)
        worst_dual = max(worst_dual, -mu)
        worst_comp = max(worst_comp, abs(mu * s))
    return float(np.max(np.abs(grad))), worst_primal, worst_dual, worst_comp


def stacked_rows(problem, width):
    C = np.zeros((width, N))
    d = np.zeros(width)
    m = problem.A.shape[0]
    C[:m], d[:m] = problem.A, problem.b
    C[MAX_INEQ:MAX_INEQ + N], d[MAX_INEQ:MAX_INEQ + N] = np.eye(N), problem.lo
    C[MAX_INEQ + N:], d[MAX_INEQ + N:] = -np.eye(N), -problem.hi
    return C, d


# -- examples -----------------------------------------------------------------

def test_identity_unconstrained():
    c = np.arange(1.0, 8.0)
    sol = solve_qp(QpProblem(np.eye(N), -c))
    np.testing.assert_allclose(sol.x, c, atol=1e-15)
    assert sol.active_set == []


def test_clipped_coordinate():
    hi = np.full(N, np.inf)
    hi[0] = 1.0
    f = np.zeros(N)
    f[0] = -2.0
    sol = solve_qp(QpProblem(np.eye(N), f, hi=hi))
    expected = np.zeros(N)
    expected[0] = 1.0
    np.testing.assert_allclose(sol.x, expected, atol=1e-15)
    assert sol.active_set == ["hi[0]"]
    assert sol.multipliers["hi[0]"] == pytest.approx(1.0)


def test_contradictory_constraints_infeasible():
    a = np.zeros(N)
    a[0] = 1.0
    hi = np.full(N, np.inf)
    hi[0] = 0.0
    with pytest.raises(QpInfeasible) as exc:
        solve_qp(QpProblem(np.eye(N), np.zeros(N), [a], [1.0], hi=hi))
    assert exc.value.constraint in {"ineq[0]", "hi[0]"}


def test_max_iterations_guard():
    rng = np.random.default_rng(3)
    problem = random_problem(rng)
    while len(solve_qp(problem).active_set) < 3:
        problem = random_problem(rng)
    with pytest.raises(QpMaxIterations) as exc:
        solve_qp(problem, max_iter=1)
    assert exc.value.x is not None


def test_problem_validation():
    with pytest.raises(ValueError, match="symmetric"):
        QpProblem(np.triu(np.ones((N, N))) + np.eye(N), np.zeros(N))
    with pytest.raises(ValueError, match="lo <= hi"):
        QpProblem(np.eye(N), np.zeros(N), lo=np.ones(N), hi=np.zeros(N))
    with pytest.raises(ValueError, match="positive definite"):
        solve_qp(QpProblem(np.diag([1, 1, 1, 1, 1, 1, -1.0]), np.zeros(N)))
    with pytest.raises(ValueError):
        solve_qp(QpProblem(np.eye(N), np.zeros(N)), tol=0.0)


# -- oracle and certificates ------------------------------------------------------

def test_objective_matches_dual_oracle():
    rng = np.random.default_rng(7)
    problems = [random_problem(rng) for _ in range(500)]
    sols = [solve_qp(p) for p in problems]
    width = MAX_INEQ + 2 * N
    C, d = zip(*(stacked_rows(p, width) for p in problems))
    lower, _ = dual_fista(np.array([p.H for p in problems]), np.array([p.f for p in problems]),
                          np.array(C), np.array(d), 5000)
    for p, s, lb in zip(problems, sols, lower):
        _, primal, _, _ = independent_kkt(p, s)
        assert primal <= 1e-8
        # feasible x gives an upper bound, the dual value a lower bound
        assert s.objective - lb <= 1e-6
        assert s.objective - lb >= -1e-9


@pytest.mark.parametrize("conditioning", ["mild", "filter"])
def test_kkt_certificate_recomputed(conditioning):
    rng = np.random.default_rng(11)
    for _ in range(500):
        p = random_problem(rng, conditioning)
        s = solve_qp(p)
        stat, primal, dual, comp = independent_kkt(p, s)
        assert stat <= 1e-9 and dual <= 1e-9 and comp <= 1e-9
        assert primal <= 1e-8
        assert s.kkt_residual <= 1e-9
        assert kkt_report(p, s.x, s.multipliers).residual == pytest.approx(s.kkt_residual, abs=1e-15)


def test_feasible_origin_is_never_infeasible():
    rng = np.random.default_rng(5)
    for _ in range(300):
        J = rng.normal(size=(6, N))
        A = rng.normal(size=(4, N))
        problem = QpProblem(J.T @ J + 1e-3 * np.eye(N), -J.T @ rng.normal(size=6),
                            A, -rng.uniform(0, 0.01, 4), -rng.uniform(0, 0.02, N), rng.uniform(0, 0.02, N))
        solve_qp(problem)


def test_constraint_monotonicity():
    rng = np.random.default_rng(13)
    for _ in range(200):
        p = random_problem(rng)
        base = solve_qp(p)
        a = rng.normal(size=N)
        tighter = p.with_inequality(a, float(a @ base.x) + rng.uniform(0, 0.3))
        try:
            assert solve_qp(tighter).objective >= base.objective - 1e-12
        except QpInfeasible:
            pass


@given(st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_scale_equivariance(alpha, seed):
    p = random_problem(np.random.default_rng(seed))
    np.testing.assert_allclose(solve_qp(p.scaled(alpha)).x, solve_qp(p).x, atol=1e-9)


def test_determinism():
    p = random_problem(np.random.default_rng(17))
    a, b = solve_qp(p), solve_qp(p)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.active_set == b.active_set and a.iterations == b.iterations


def test_hint_does_not_change_result():
    rng = np.random.default_rng(19)
    ws = QpWorkspace()
    for _ in range(100):
        p = random_problem(rng)
        cold = solve_qp(p)
        names = ["ineq[0]", "lo[3]", "hi[5]", "nonexistent"]
        for hint in (cold.active_set, names, []):
            np.testing.assert_allclose(solve_qp(p, active_hint=hint).x, cold.x, atol=1e-10)
        np.testing.assert_allclose(ws.solve(p).x, cold.x, atol=1e-10)
        assert ws.last_active == ws.solve(p).active_set


def test_supplied_factor():
    p = random_problem(np.random.default_rng(23))
    J = inverse_factor(p.H)
    np.testing.assert_allclose(J @ J.T, np.linalg.inv(p.H), atol=1e-12)
    assert solve_qp(p, factor=J).x.tobytes() == solve_qp(p).x.tobytes()
    stack = inverse_factor(np.stack([p.H, 2 * p.H]))
    np.testing.assert_allclose(stack[1] @ stack[1].T, np.linalg.inv(2 * p.H), atol=1e-12)


def test_dump_roundtrip():
    p = random_problem(np.random.default_rng(29))
    s = solve_qp(p)
    text = dump_problem(p, s)
    assert text.startswith("# cbfshield qp dump v1")
    again = load_problem_dump(text)
    for name in ("H", "f", "A", "b", "lo", "hi"):
        np.testing.assert_array_equal(getattr(again, name), getattr(p, name))
    assert again.labels == p.labels
    assert solve_qp(again).x.tobytes() == s.x.tobytes()


def test_dump_keeps_infinite_bounds():
    p = QpProblem(np.eye(N), np.ones(N))
    again = load_problem_dump(dump_problem(p))
    assert np.all(np.isinf(again.lo)) and np.all(np.isinf(again.hi))
