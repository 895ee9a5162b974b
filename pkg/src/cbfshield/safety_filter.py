"""Joint-space CBF-QP safety filter.

Given the measured configuration q and the policy's Cartesian delta u
(translation, axis-angle rotation; base frame), the filter solves

    min_dq  ||J(q) dq - u||^2 + lam ||dq||^2
    s.t.    grad h_k(q)' dq + gamma h_k(q) >= 0     for each constrained pair k
            max(q_min - q, -cap) <= dq <= min(q_max - q, cap)

with q held fixed, so the objective is quadratic and every constraint is
linear in dq. The gripper bit never enters the problem and is passed
through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .collision import BarrierEvaluation, CollisionScene, barrier_batch
from .kinematics import FLANGE, N_JOINTS, KinematicChain, KinematicState, _jacobian_from_state, joint_config, kinematic_state, state_at
from .qp import DEFAULT_MAX_ITER, DEFAULT_TOL, FEAS_TOL, QpError, QpProblem, QpSolution, QpWorkspace, inverse_factor, solve_qp

PER_PAIR = "per_pair"
SINGLE_MIN = "single_min"

STATUS_OK = "ok"
STATUS_UNSAFE_START = "unsafe_start"

INTERVENTION_RTOL = 1e-6


class FilterError(RuntimeError):
    """The QP behind the filter failed; ``cause`` is the solver error."""

    def __init__(self, message: str, cause: QpError | None = None, q=None):
        super().__init__(message)
        self.cause = cause
        self.q = None if q is None else np.array(q)


@dataclass(frozen=True)
class ActionCommand:
    """One policy action: Cartesian delta pose plus a binary gripper bit."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gripper: int = 0

    def __post_init__(self):
        t = np.array(self.translation, dtype=float).reshape(3)
        r = np.array(self.rotation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r))):
            raise ValueError("action entries must be finite")
        if np.linalg.norm(r) >= np.pi:
            raise ValueError("rotation delta must have norm < pi")
        if self.gripper not in (0, 1, True, False):
            raise ValueError(f"gripper must be binary, got {self.gripper!r}")
        t.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "gripper", int(self.gripper))

    @property
    def twist(self) -> np.ndarray:
        """The 6-vector u = (translation, rotation)."""
        return np.concatenate([self.translation, self.rotation])

    def scaled(self, alpha: float) -> ActionCommand:
        return ActionCommand(alpha * self.translation, alpha * self.rotation, self.gripper)


@dataclass(frozen=True)
class FilterParams:
    lam: float = 1e-3
    gamma: float = 0.5
    activation_distance: float = 0.15
    step_cap: float = 0.02
    qp_tol: float = DEFAULT_TOL
    qp_max_iter: int = DEFAULT_MAX_ITER
    constraint_mode: str = PER_PAIR

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not self.activation_distance > 0:
            raise ValueError("activation_distance must be > 0")
        if not self.step_cap > 0:
            raise ValueError("step_cap must be > 0")
        if not self.qp_tol > 0 or int(self.qp_max_iter) < 1:
            raise ValueError("qp_tol must be > 0 and qp_max_iter >= 1")
        if self.constraint_mode not in (PER_PAIR, SINGLE_MIN):
            raise ValueError(f"constraint_mode must be {PER_PAIR!r} or {SINGLE_MIN!r}")

    def to_doc(self) -> dict:
        return {
            "lambda": self.lam,
            "gamma": self.gamma,
            "activation_distance": self.activation_distance,
            "step_cap": self.step_cap,
            "qp_tol": self.qp_tol,
            "qp_max_iter": int(self.qp_max_iter),
            "constraint_mode": self.constraint_mode,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> FilterParams:
        known = {"lambda": "lam", "gamma": "gamma", "activation_distance": "activation_distance", "step_cap": "step_cap",
                 "qp_tol": "qp_tol", "qp_max_iter": "qp_max_iter", "constraint_mode": "constraint_mode"}
        unknown = set(doc) - set(known)
        if unknown:
            raise ValueError(f"unknown filter fields: {sorted(unknown)}")
        kw = {}
        for key, attr in known.items():
            if key in doc:
                val = doc[key]
                if attr == "qp_max_iter":
                    kw[attr] = int(val)
                elif attr == "constraint_mode":
                    kw[attr] = str(val)
                else:
                    kw[attr] = float(val)
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class FilterResult:
    dq_safe: np.ndarray
    gripper: int
    intervened: bool
    tracking_error: float
    barrier_before: float
    barrier_after: float
    active_constraints: list[tuple[str, str]]
    solver_stats: QpSolution | None
    status: str = STATUS_OK
    dls_tracking_error: float = 0.0
    barrier_eval_after: BarrierEvaluation | None = field(default=None, repr=False)
    state_after: KinematicState | None = field(default=None, repr=False)


def damped_least_squares(J: np.ndarray, u: np.ndarray, lam: float) -> np.ndarray:
    """Closed-form (J'J + lam I)^{-1} J'u."""
    H = J.T @ J + lam * np.eye(J.shape[1])
    return np.linalg.solve(H, J.T @ u)


def box_bounds(chain: KinematicChain, q: np.ndarray, step_cap: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-joint displacement bounds; ``q`` may be stacked (E, 7)."""
    lo = np.maximum(chain.limits.lower - q, -step_cap)
    hi = np.minimum(chain.limits.upper - q, step_cap)
    return lo, hi


def _cbf_rows(bar: BarrierEvaluation, params: FilterParams):
    """Linear rows a'dq >= b, one per constrained (sphere, obstacle) pair."""
    if bar.active_pair is None:
        return np.zeros((0, N_JOINTS)), np.zeros(0), []
    if params.constraint_mode == SINGLE_MIN:
        sel = np.zeros(bar.pair_values.shape, dtype=bool)
        sel[bar.sphere_ids.index(bar.active_pair[0]), bar.obstacle_ids.index(bar.active_pair[1])] = True
    else:
        sel = bar.pair_values < params.activation_distance
    # a zero gradient with h >= 0 gives 0 >= -gamma h, always satisfied
    sel &= np.any(bar.pair_gradients != 0.0, axis=2) | (bar.pair_values < 0.0)
    picks = np.argwhere(sel)
    A = bar.pair_gradients[sel]
    b = -params.gamma * bar.pair_values[sel]
    pair_ids = [(bar.sphere_ids[i], bar.obstacle_ids[j]) for i, j in picks.tolist()]
    return A, b, pair_ids


class FilterStep(NamedTuple):
    """Outcome of one filter call on a stack of E configurations.

    ``results[e]`` is None where the QP failed; ``errors[e]`` then holds
    the FilterError and that entry's displacement is zero.
    """

    results: list
    errors: dict
    state_after: KinematicState
    barriers_after: list


def filter_step(
    chain: KinematicChain,
    scene: CollisionScene,
    Q,
    actions,
    params: FilterParams = FilterParams(),
    workspaces=None,
    barriers=None,
    state: KinematicState | None = None,
) -> FilterStep:
    """Filter one action for each of E independent configurations.

    Everything except the QP itself is evaluated on the whole stack at
    once; ``Q`` has shape (E, 7) and ``actions`` holds E commands.
    ``barriers`` and ``state`` may carry evaluations already made at
    ``Q``. ``workspaces`` holds one QP workspace per entry, or None.
    """
    Q = np.asarray(Q, dtype=float)
    E = Q.shape[0]
    if Q.shape != (E, N_JOINTS) or len(actions) != E:
        raise ValueError("expected E configurations of 7 joints and E actions")
    if not np.all(np.isfinite(Q)):
        raise ValueError("joint configuration entries must be finite")
    lower, upper = chain.limits.lower, chain.limits.upper
    outside = np.flatnonzero(np.any((Q < lower - FEAS_TOL) | (Q > upper + FEAS_TOL), axis=1))
    if outside.size:
        raise ValueError(f"q lies outside the joint limits (entry {int(outside[0])})")
    st = state if state is not None else kinematic_state(chain, Q)
    bars = barriers if barriers is not None else barrier_batch(st, scene)
    U = np.array([a.twist for a in actions]).reshape(E, 6)

    J = _jacobian_from_state(st)
    Jt = np.swapaxes(J, 1, 2)
    H = Jt @ J
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    H[:, np.arange(N_JOINTS), np.arange(N_JOINTS)] += params.lam
    f = -(Jt @ U[:, :, None])[:, :, 0]
    dq_dls = np.linalg.solve(H, -f[:, :, None])[:, :, 0]
    dls_err = np.linalg.norm((J @ dq_dls[:, :, None])[:, :, 0] - U, axis=1)
    lo, hi = box_bounds(chain, Q, params.step_cap)
    in_box = np.all((dq_dls >= lo) & (dq_dls <= hi), axis=1)
    stationarity = np.max(np.abs((H @ dq_dls[:, :, None])[:, :, 0] + f), axis=1)

    DQ = np.empty((E, N_JOINTS))
    solutions, statuses, actives, errors = [None] * E, [STATUS_OK] * E, [[] for _ in range(E)], {}
    pending = []
    for e in range(E):
        bar = bars[e]
        A, b, pair_ids = _cbf_rows(bar, params)
        if bar.value < 0.0:
            statuses[e] = STATUS_UNSAFE_START
        if in_box[e] and bool(np.all(A @ dq_dls[e] >= b)):
            # the unconstrained minimizer is feasible, hence optimal
            x = dq_dls[e]
            obj = float(0.5 * x @ H[e] @ x + f[e] @ x)
            solutions[e] = QpSolution(x=x, active_set=[], iterations=0, kkt_residual=float(stationarity[e]), objective=obj)
            DQ[e] = x
        else:
            pending.append((e, A, b, pair_ids))

    if pending:
        factors = inverse_factor(H[[p[0] for p in pending]])
    for (e, A, b, pair_ids), factor in zip(pending, factors if pending else ()):
        labels = [f"cbf:{si}|{oi}" for si, oi in pair_ids]
        problem = QpProblem.trusted(H[e], f[e], A, b, lo[e], hi[e], labels)
        try:
            if workspaces is not None and workspaces[e] is not None:
                sol = workspaces[e].solve(problem, factor)
            else:
                sol = solve_qp(problem, params.qp_tol, params.qp_max_iter, factor=factor)
        except QpError as exc:
            if statuses[e] != STATUS_UNSAFE_START:
                errors[e] = FilterError(f"safety QP failed at h = {bars[e].value:.6g}: {exc}", cause=exc, q=Q[e])
                DQ[e] = 0.0
                continue
            g = bars[e].gradient
            DQ[e] = np.where(g > 0, hi[e], np.where(g < 0, lo[e], 0.0))
            continue
        solutions[e] = sol
        DQ[e] = sol.x
        if labels:
            label_to_pair = dict(zip(labels, pair_ids))
            actives[e] = [label_to_pair[c] for c in sol.active_set if c in label_to_pair]

    track = np.linalg.norm((J @ DQ[:, :, None])[:, :, 0] - U, axis=1)
    unorm = np.linalg.norm(U, axis=1)
    st_after = kinematic_state(chain, Q + DQ)
    bars_after = barrier_batch(st_after, scene)
    results = [None] * E
    for e in range(E):
        if e in errors:
            continue
        intervened = bool(actives[e]) or (track[e] - dls_err[e]) > INTERVENTION_RTOL * (1.0 + unorm[e])
        results[e] = FilterResult(
            dq_safe=DQ[e],
            gripper=actions[e].gripper,
            intervened=intervened or statuses[e] == STATUS_UNSAFE_START,
            tracking_error=float(track[e]),
            barrier_before=float(bars[e].value),
            barrier_after=float(bars_after[e].value),
            active_constraints=actives[e],
            solver_stats=solutions[e],
            status=statuses[e],
            dls_tracking_error=float(dls_err[e]),
            barrier_eval_after=bars_after[e],
            state_after=state_at(st_after, e),
        )
    return FilterStep(results, errors, st_after, bars_after)


def filter_action(
    chain: KinematicChain,
    scene: CollisionScene,
    q,
    action: ActionCommand,
    params: FilterParams = FilterParams(),
    workspace: QpWorkspace | None = None,
    barrier: BarrierEvaluation | None = None,
    state: KinematicState | None = None,
) -> FilterResult:
    """Project one policy action onto the safe set.

    ``barrier`` and ``state`` may carry a precomputed barrier evaluation
    and forward pass at ``q`` (for example the previous result's
    ``barrier_eval_after`` and ``state_after``).

    If the start state is already unsafe (h < 0) the result has status
    ``"unsafe_start"``: the CBF rows then demand an increase of every
    violated pair, and when that QP is infeasible the step falls back to
    the box vertex maximizing grad(h)' dq.
    """
    q = joint_config(q)
    if not chain.limits.contains(q, FEAS_TOL):
        raise ValueError("q lies outside the joint limits")
    stacked = None if state is None else KinematicState(*(a[None] for a in state))
    out = filter_step(chain, scene, q[None, :], [action], params, [workspace], None if barrier is None else [barrier], stacked)
    if out.errors:
        raise out.errors[0]
    return out.results[0]


class SafetyFilter:
    """A filter bound to one robot, scene and parameter set.

    Holds a QP warm-start workspace, so one instance belongs to one
    control loop.
    """

    def __init__(self, chain: KinematicChain, scene: CollisionScene, params: FilterParams = FilterParams()):
        self.chain = chain
        self.scene = scene
        self.params = params
        self.workspace = QpWorkspace(params.qp_tol, params.qp_max_iter)

    def __call__(self, q, action: ActionCommand, barrier: BarrierEvaluation | None = None, state: KinematicState | None = None) -> FilterResult:
        return filter_action(self.chain, self.scene, q, action, self.params, self.workspace, barrier, state)

    def flange_position(self, q) -> np.ndarray:
        return kinematic_state(self.chain, q).positions[FLANGE]
