"""Dense strictly convex QP solver.

    minimize    1/2 x'Hx + f'x
    subject to  a_k'x >= b_k        (general inequalities)
                lo <= x <= hi       (box, entries may be infinite)

Dual active-set method of Goldfarb and Idnani: start from the
unconstrained minimizer, repeatedly add the most violated constraint and
drop constraints whose multipliers would turn negative. It only needs a
Cholesky factor of H, never a feasible starting point, and it detects an
infeasible problem when a violated constraint can neither be reached nor
traded for an active one.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100
FEAS_TOL = 1e-8
SYM_TOL = 1e-12
# squared sine of the angle below which a new normal counts as dependent on the active ones
_DEPENDENT = 1e-14


class QpError(RuntimeError):
    """Base for solver failures; carries the iterate at the time of failure."""

    def __init__(self, message: str, x=None, active_set=(), iterations: int = 0):
        super().__init__(message)
        self.x = None if x is None else np.array(x)
        self.active_set = list(active_set)
        self.iterations = iterations


class QpInfeasible(QpError):
    """The constraints admit no point; ``constraint`` is the one that could not be satisfied."""

    def __init__(self, message: str, constraint: str = "", **kw):
        super().__init__(message, **kw)
        self.constraint = constraint


class QpMaxIterations(QpError):
    pass


@dataclass(frozen=True, eq=False)
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    A: np.ndarray = None  # (m, n) rows a_k
    b: np.ndarray = None  # (m,)
    lo: np.ndarray = None
    hi: np.ndarray = None
    labels: tuple[str, ...] = None  # names of the general inequalities

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        n = H.shape[0]
        if H.shape != (n, n) or n == 0:
            raise ValueError(f"H must be square, got shape {H.shape}")
        if np.max(np.abs(H - H.T)) > SYM_TOL * max(1.0, np.max(np.abs(H))):
            raise ValueError("H must be symmetric")
        f = np.array(self.f, dtype=float).reshape(n)
        A = np.zeros((0, n)) if self.A is None else np.array(self.A, dtype=float).reshape(-1, n)
        b = np.zeros(0) if self.b is None else np.array(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree on the number of inequalities")
        lo = np.full(n, -np.inf) if self.lo is None else np.array(self.lo, dtype=float).reshape(n)
        hi = np.full(n, np.inf) if self.hi is None else np.array(self.hi, dtype=float).reshape(n)
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi")
        for arr in (H, f, A, b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("problem data must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds must not be NaN")
        labels = tuple(f"ineq[{k}]" for k in range(A.shape[0])) if self.labels is None else tuple(self.labels)
        if len(labels) != A.shape[0]:
            raise ValueError("one label per inequality is required")
        for name, val in (("H", H), ("f", f), ("A", A), ("b", b), ("lo", lo), ("hi", hi)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_rows", None)

    @classmethod
    def trusted(cls, H, f, A, b, lo, hi, labels) -> QpProblem:
        """Build without validation; for callers that construct H = J'J + lam I themselves."""
        obj = object.__new__(cls)
        for name, val in (("H", H), ("f", f), ("A", A), ("b", b), ("lo", lo), ("hi", hi), ("labels", tuple(labels)), ("_rows", None)):
            object.__setattr__(obj, name, val)
        return obj

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def constraint_rows(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """All constraints stacked as ``C x >= d`` with their identifiers.

        Row order: general inequalities, finite lower bounds, finite upper bounds.
        """
        if self._rows is None:
            n, m = self.n, self.A.shape[0]
            lo_fin, hi_fin = np.isfinite(self.lo), np.isfinite(self.hi)
            if lo_fin.all() and hi_fin.all():
                eye = np.eye(n)
                C = np.concatenate([self.A, eye, -eye])
                d = np.concatenate([self.b, self.lo, -self.hi])
                idx = np.arange(n)
                object.__setattr__(self, "_rows", (C, d, _ConstraintIds(self.labels, idx, idx)))
                return self._rows
            lo_idx = np.flatnonzero(lo_fin)
            hi_idx = np.flatnonzero(hi_fin)
            k_lo, k_hi = len(lo_idx), len(hi_idx)
            C = np.zeros((m + k_lo + k_hi, n))
            C[:m] = self.A
            C[m + np.arange(k_lo), lo_idx] = 1.0
            C[m + k_lo + np.arange(k_hi), hi_idx] = -1.0
            d = np.concatenate([self.b, self.lo[lo_idx], -self.hi[hi_idx]])
            object.__setattr__(self, "_rows", (C, d, _ConstraintIds(self.labels, lo_idx, hi_idx)))
        return self._rows

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x)

    def scaled(self, alpha: float) -> QpProblem:
        return QpProblem(alpha * self.H, alpha * self.f, self.A, self.b, self.lo, self.hi, self.labels)

    def with_inequality(self, a, b, label: str | None = None) -> QpProblem:
        A = np.vstack([self.A, np.asarray(a, dtype=float).reshape(1, -1)])
        bb = np.append(self.b, float(b))
        return QpProblem(self.H, self.f, A, bb, self.lo, self.hi, self.labels + (label or f"ineq[{len(self.labels)}]",))


class _ConstraintIds:
    """Constraint identifiers, formatted on demand."""

    def __init__(self, labels, lo_idx, hi_idx):
        self.labels, self.lo_idx, self.hi_idx = labels, lo_idx, hi_idx
        self._m, self._k_lo = len(labels), len(lo_idx)

    def __len__(self):
        return self._m + self._k_lo + len(self.hi_idx)

    def __getitem__(self, k: int) -> str:
        if k < self._m:
            return self.labels[k]
        if k < self._m + self._k_lo:
            return f"lo[{self.lo_idx[k - self._m]}]"
        return f"hi[{self.hi_idx[k - self._m - self._k_lo]}]"

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def index(self, name: str) -> int:
        if name in self.labels:
            return self.labels.index(name)
        for prefix, idx, offset in (("lo[", self.lo_idx, self._m), ("hi[", self.hi_idx, self._m + self._k_lo)):
            if name.startswith(prefix) and name.endswith("]"):
                hits = np.flatnonzero(idx == int(name[3:-1]))
                if hits.size:
                    return offset + int(hits[0])
        raise ValueError(f"unknown constraint {name!r}")

    def __contains__(self, name: str) -> bool:
        try:
            self.index(name)
        except ValueError:
            return False
        return True


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    active_set: list[str]
    iterations: int
    kkt_residual: float
    objective: float
    multipliers: dict[str, float] = field(default_factory=dict)
    primal_residual: float = 0.0


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.dual, self.complementarity)


def kkt_report(problem: QpProblem, x, multipliers: dict[str, float]) -> KktReport:
    """Optimality residuals of ``x`` with multipliers keyed by constraint id."""
    C, d, ids = problem.constraint_rows()
    x = np.asarray(x, dtype=float)
    mu = np.array([multipliers.get(i, 0.0) for i in ids])
    slack = C @ x - d if len(ids) else np.zeros(0)
    grad = problem.H @ x + problem.f - C.T @ mu
    return KktReport(
        stationarity=float(np.max(np.abs(grad))),
        primal=float(max(0.0, -slack.min())) if slack.size else 0.0,
        dual=float(max(0.0, -mu.min())) if mu.size else 0.0,
        complementarity=float(np.max(np.abs(mu * slack))) if mu.size else 0.0,
    )


def inverse_factor(H: np.ndarray) -> np.ndarray:
    """J = L^{-T} for the Cholesky factor L of H, so that H^{-1} = J J'.

    Works on stacks of matrices as well.
    """
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise ValueError("H must be positive definite") from None
    return np.swapaxes(np.linalg.inv(L), -1, -2)


def solve_qp(problem: QpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, active_hint=None,
             factor: np.ndarray | None = None) -> QpSolution:
    """Solve ``problem`` to a KKT point (its unique global minimizer).

    ``active_hint`` is an optional iterable of constraint ids (e.g. the
    previous solution's active set); hinted violated constraints are added
    first. The result does not depend on the hint beyond round-off.
    ``factor`` may supply ``inverse_factor(problem.H)`` when the caller
    already has it.

    Raises QpInfeasible or QpMaxIterations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    C, d, ids = problem.constraint_rows()
    m, n = C.shape
    J = inverse_factor(problem.H) if factor is None else factor
    hint = {ids.index(h) for h in active_hint if h in ids} if active_hint else set()
    row_norm = np.linalg.norm(C, axis=1) if m else np.zeros(0)
    viol_tol = 1e-12 * (1.0 + np.abs(d))

    x = -J @ (J.T @ problem.f)
    active: list[int] = []
    is_active = np.zeros(m, dtype=bool)
    u = np.zeros(0)
    iterations = 0

    def names():
        return [ids[k] for k in active]

    while True:
        slack = C @ x - d if m else np.zeros(0)
        violated = np.flatnonzero((slack < -viol_tol) & ~is_active)
        if violated.size == 0:
            break
        hinted = [k for k in violated.tolist() if k in hint] if hint else None
        if hinted:
            p = min(hinted)
        else:
            score = -slack[violated] / row_norm[violated]
            p = int(violated[np.argmax(score)])  # argmax keeps the lowest index on ties
        npl = C[p]
        u_p = 0.0

        while True:
            iterations += 1
            if iterations > max_iter:
                raise QpMaxIterations(f"no convergence in {max_iter} iterations", x=x, active_set=names(), iterations=iterations - 1)
            q = len(active)
            Jn = J.T @ npl
            if q:
                Qf, Rf = np.linalg.qr(J.T @ C[active].T, mode="complete")
                dv = Qf.T @ Jn
                r = np.linalg.solve(Rf[:q, :q], dv[:q])
                z = J @ (Qf[:, q:] @ dv[q:])
                zn = float(dv[q:] @ dv[q:])
            else:
                r = np.zeros(0)
                z = J @ Jn
                zn = float(Jn @ Jn)

            t1, k_drop = np.inf, -1
            for j in range(q):
                if r[j] > 0.0:
                    ratio = u[j] / r[j]
                    if ratio < t1:
                        t1, k_drop = ratio, j
            dependent = zn <= _DEPENDENT * float(Jn @ Jn)
            s_p = float(npl @ x - d[p])
            t2 = np.inf if dependent else -s_p / zn

            if not np.isfinite(t1) and not np.isfinite(t2):
                raise QpInfeasible(
                    f"constraint {ids[p]} cannot be satisfied together with the active set",
                    constraint=ids[p], x=x, active_set=names(), iterations=iterations,
                )
            if not np.isfinite(t2):
                u = u - t1 * r
                u_p += t1
                is_active[active[k_drop]] = False
                del active[k_drop]
                u = np.delete(u, k_drop)
                continue
            t = min(t1, t2)
            x = x + t * z
            u = u - t * r
            u_p += t
            if t2 <= t1:
                active.append(p)
                is_active[p] = True
                u = np.append(u, u_p)
                break
            is_active[active[k_drop]] = False
            del active[k_drop]
            u = np.delete(u, k_drop)

    mu = np.zeros(m)
    mu[active] = u
    slack = C @ x - d if m else np.zeros(0)
    stationarity = float(np.max(np.abs(problem.H @ x + problem.f - C.T @ mu)))
    complementarity = float(np.max(np.abs(mu * slack))) if m else 0.0
    primal = float(max(0.0, -slack.min())) if m else 0.0
    dual = float(max(0.0, -mu.min())) if m else 0.0
    order = sorted(active)
    return QpSolution(
        x=x,
        active_set=[ids[k] for k in order],
        iterations=iterations,
        kkt_residual=max(stationarity, complementarity, dual),
        objective=float(0.5 * x @ problem.H @ x + problem.f @ x),
        multipliers={ids[k]: float(mu[k]) for k in order},
        primal_residual=primal,
    )


class QpWorkspace:
    """Warm-start state for one caller: remembers the last active set.

    Not safe to share between concurrent callers; make one per control loop.
    """

    def __init__(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter
        self.last_active: list[str] = []

    def solve(self, problem: QpProblem, factor: np.ndarray | None = None) -> QpSolution:
        sol = solve_qp(problem, self.tol, self.max_iter, active_hint=self.last_active, factor=factor)
        self.last_active = list(sol.active_set)
        return sol

    def reset(self):
        self.last_active = []


# -- debug dump ------------------------------------------------------------

def _fmt(v) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(v))


def dump_problem(problem: QpProblem, solution: QpSolution | None = None) -> str:
    """Plain-text dump of a problem (and optionally its solution) for bug reports."""
    out = io.StringIO()
    out.write("# cbfshield qp dump v1\n")
    out.write(f"n {problem.n}\n")
    for row in problem.H:
        out.write(f"H {_fmt(row)}\n")
    out.write(f"f {_fmt(problem.f)}\n")
    for a, b, label in zip(problem.A, problem.b, problem.labels):
        out.write(f"ineq {label} {_fmt(a)} >= {float(b)!r}\n")
    out.write(f"lo {_fmt(problem.lo)}\n")
    out.write(f"hi {_fmt(problem.hi)}\n")
    if solution is not None:
        out.write(f"x {_fmt(solution.x)}\n")
        out.write(f"active {' '.join(solution.active_set)}\n")
        out.write(f"iterations {solution.iterations}\n")
        out.write(f"kkt_residual {solution.kkt_residual!r}\n")
        out.write(f"objective {solution.objective!r}\n")
    return out.getvalue()


def load_problem_dump(text: str) -> QpProblem:
    H, A, b, labels = [], [], [], []
    f = lo = hi = None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key == "H":
            H.append([float(v) for v in rest.split()])
        elif key == "f":
            f = [float(v) for v in rest.split()]
        elif key == "ineq":
            label, _, body = rest.partition(" ")
            lhs, _, rhs = body.partition(" >= ")
            labels.append(label)
            A.append([float(v) for v in lhs.split()])
            b.append(float(rhs))
        elif key == "lo":
            lo = [float(v) for v in rest.split()]
        elif key == "hi":
            hi = [float(v) for v in rest.split()]
    n = len(H)
    return QpProblem(np.array(H), f, np.array(A).reshape(-1, n), np.array(b), lo, hi, tuple(labels))
