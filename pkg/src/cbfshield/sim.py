"""Deterministic kinematic rollouts of scripted or randomized action streams.

Each policy action is a Cartesian delta. The simulator splits it evenly
over ``substeps_per_action`` substeps. For each substep it either asks the
safety filter for a joint displacement or, with the filter disabled,
applies the plain damped least-squares step. Then it integrates
``q <- q + dq``. There is no dynamics model: the state is the joint
vector.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .collision import CollisionScene, barrier_batch, barrier_from_state, load_scene
from .config import SCHEMA_VERSION, ConfigError, as_float, as_vector, dump_document, read_document, require, resolve
from .kinematics import FLANGE, N_JOINTS, KinematicChain, _jacobian_from_state, kinematic_state, load_chain
from .qp import QpWorkspace
from .safety_filter import ActionCommand, FilterParams, filter_step

VIOLATION_TOL = 1e-3
STATUS_FILTER_ERROR = "filter_error"
STATUS_RAW = "raw"


# -- policies ----------------------------------------------------------------

def _action_doc(a: ActionCommand) -> dict:
    return {"translation": [float(v) for v in a.translation], "rotation": [float(v) for v in a.rotation], "gripper": a.gripper}


@dataclass(frozen=True, eq=False)
class ConstantDelta:
    """The same action every step."""

    translation: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gripper: int = 0

    def __post_init__(self):
        a = ActionCommand(self.translation, self.rotation, self.gripper)
        object.__setattr__(self, "_action", a)
        object.__setattr__(self, "translation", a.translation)
        object.__setattr__(self, "rotation", a.rotation)

    def action(self, step: int, ee_position: np.ndarray, seed: int) -> ActionCommand:
        return self._action

    def to_doc(self) -> dict:
        return {"kind": "constant_delta", **_action_doc(self._action)}


@dataclass(frozen=True, eq=False)
class WaypointApproach:
    """Proportional step toward a Cartesian target, optionally norm-capped."""

    target_position: np.ndarray
    gain: float
    max_step: float | None = None
    gripper: int = 0

    def __post_init__(self):
        t = np.array(self.target_position, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("target_position must be finite")
        if not 0 < self.gain <= 1:
            raise ValueError("gain must lie in (0, 1]")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be > 0")
        object.__setattr__(self, "target_position", t)

    def action(self, step: int, ee_position: np.ndarray, seed: int) -> ActionCommand:
        delta = self.gain * (self.target_position - ee_position)
        if self.max_step is not None:
            norm = float(np.linalg.norm(delta))
            if norm > self.max_step:
                delta = delta * (self.max_step / norm)
        return ActionCommand(delta, np.zeros(3), self.gripper)

    def to_doc(self) -> dict:
        doc = {"kind": "waypoint_approach", "target_position": [float(v) for v in self.target_position], "gain": float(self.gain)}
        if self.max_step is not None:
            doc["max_step"] = float(self.max_step)
        doc["gripper"] = self.gripper
        return doc


@dataclass(frozen=True, eq=False)
class NoisyHallucination:
    """A base policy plus Gaussian translation noise and a constant bias.

    The noise for step k comes from a Philox stream keyed on the seed with
    the counter set to k, so it does not depend on call order.
    """

    base: object
    noise_std: np.ndarray
    ood_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        std = np.array(self.noise_std, dtype=float).reshape(3)
        bias = np.array(self.ood_bias, dtype=float).reshape(3)
        if not np.all(np.isfinite(std)) or np.any(std < 0):
            raise ValueError("noise_std must be finite and >= 0")
        if not np.all(np.isfinite(bias)):
            raise ValueError("ood_bias must be finite")
        object.__setattr__(self, "noise_std", std)
        object.__setattr__(self, "ood_bias", bias)

    def noise(self, step: int, seed: int) -> np.ndarray:
        gen = np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF, counter=int(step)))
        return self.noise_std * gen.standard_normal(3)

    def action(self, step: int, ee_position: np.ndarray, seed: int) -> ActionCommand:
        a = self.base.action(step, ee_position, seed)
        return ActionCommand(a.translation + self.noise(step, seed) + self.ood_bias, a.rotation, a.gripper)

    def to_doc(self) -> dict:
        return {
            "kind": "noisy_hallucination",
            "noise_std": [float(v) for v in self.noise_std],
            "ood_bias": [float(v) for v in self.ood_bias],
            "base": self.base.to_doc(),
        }


@dataclass(frozen=True, eq=False)
class Scripted:
    """An explicit action list; step k plays ``actions[k]``."""

    actions: tuple

    def __post_init__(self):
        acts = tuple(a if isinstance(a, ActionCommand) else ActionCommand(*a) for a in self.actions)
        if not acts:
            raise ValueError("scripted policy needs at least one action")
        object.__setattr__(self, "actions", acts)

    def action(self, step: int, ee_position: np.ndarray, seed: int) -> ActionCommand:
        return self.actions[step]

    def to_doc(self) -> dict:
        return {"kind": "scripted", "actions": [_action_doc(a) for a in self.actions]}


PolicySpec = ConstantDelta | WaypointApproach | NoisyHallucination | Scripted


def policy_from_doc(doc, path: str = "policy") -> PolicySpec:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    kind = require(doc, "kind", path)
    try:
        if kind == "constant_delta":
            return ConstantDelta(
                as_vector(require(doc, "translation", path), 3, f"{path}.translation"),
                as_vector(doc.get("rotation", [0, 0, 0]), 3, f"{path}.rotation"),
                int(doc.get("gripper", 0)),
            )
        if kind == "waypoint_approach":
            max_step = doc.get("max_step")
            return WaypointApproach(
                as_vector(require(doc, "target_position", path), 3, f"{path}.target_position"),
                as_float(require(doc, "gain", path), f"{path}.gain"),
                None if max_step is None else as_float(max_step, f"{path}.max_step"),
                int(doc.get("gripper", 0)),
            )
        if kind == "noisy_hallucination":
            return NoisyHallucination(
                policy_from_doc(require(doc, "base", path), f"{path}.base"),
                as_vector(require(doc, "noise_std", path), 3, f"{path}.noise_std"),
                as_vector(doc.get("ood_bias", [0, 0, 0]), 3, f"{path}.ood_bias"),
            )
        if kind == "scripted":
            items = require(doc, "actions", path)
            if not isinstance(items, list):
                raise ConfigError(f"{path}.actions", "expected a list")
            acts = []
            for i, a in enumerate(items):
                p = f"{path}.actions[{i}]"
                acts.append(ActionCommand(
                    as_vector(require(a, "translation", p), 3, f"{p}.translation"),
                    as_vector(a.get("rotation", [0, 0, 0]), 3, f"{p}.rotation"),
                    int(a.get("gripper", 0)),
                ))
            return Scripted(tuple(acts))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown policy kind {kind!r}")


# -- scenario configuration ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    chain_path: str
    scene_path: str
    initial_q: np.ndarray
    policy: PolicySpec
    steps: int
    substeps_per_action: int = 10
    filter: FilterParams = FilterParams()
    filter_enabled: bool = True
    seed: int = 0
    name: str = "scenario"
    notes: str = ""
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        q = np.array(self.initial_q, dtype=float).reshape(N_JOINTS)
        q.flags.writeable = False
        object.__setattr__(self, "initial_q", q)
        if int(self.steps) < 1:
            raise ConfigError("steps", "must be >= 1")
        if int(self.substeps_per_action) < 1:
            raise ConfigError("substeps_per_action", "must be >= 1")
        if isinstance(self.policy, Scripted) and len(self.policy.actions) < int(self.steps):
            raise ConfigError("policy.actions", f"scripted policy has {len(self.policy.actions)} actions for {self.steps} steps")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "substeps_per_action", int(self.substeps_per_action))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "filter_enabled", bool(self.filter_enabled))

    def replace(self, **kw) -> ScenarioConfig:
        return replace(self, **kw)

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "notes": self.notes,
            "chain": self.chain_path,
            "scene": self.scene_path,
            "initial_q": [float(v) for v in self.initial_q],
            "steps": self.steps,
            "substeps_per_action": self.substeps_per_action,
            "seed": self.seed,
            "filter_enabled": self.filter_enabled,
            "filter": self.filter.to_doc(),
            "policy": self.policy.to_doc(),
        }

    def digest(self, include_filter_flag: bool = True) -> str:
        doc = self.to_doc()
        doc.pop("notes")
        if not include_filter_flag:
            doc.pop("filter_enabled")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def load_assets(self) -> tuple[KinematicChain, CollisionScene]:
        base = None if self.base_dir is None else Path(self.base_dir)
        return _load_chain_cached(str(resolve(self.chain_path, base))), _load_scene_cached(str(resolve(self.scene_path, base)))


_ASSET_CACHE: dict = {}


def _load_chain_cached(path: str) -> KinematicChain:
    key = ("chain", path)
    if key not in _ASSET_CACHE:
        _ASSET_CACHE[key] = load_chain(Path(path))
    return _ASSET_CACHE[key]


def _load_scene_cached(path: str) -> CollisionScene:
    key = ("scene", path)
    if key not in _ASSET_CACHE:
        _ASSET_CACHE[key] = load_scene(Path(path))
    return _ASSET_CACHE[key]


def validate_config(config: ScenarioConfig) -> tuple[KinematicChain, CollisionScene]:
    """Load the chain and scene and check the start state.

    Raises ConfigError if initial_q is out of limits or starts unsafe.
    """
    try:
        chain, scene = config.load_assets()
    except ConfigError as exc:
        raise ConfigError(f"assets.{exc.path}" if exc.path else "assets", exc.message) from None
    lower, upper = chain.limits.lower, chain.limits.upper
    for i in range(N_JOINTS):
        if not lower[i] <= config.initial_q[i] <= upper[i]:
            raise ConfigError(f"initial_q[{i}]", f"{config.initial_q[i]:.6g} outside [{lower[i]:.6g}, {upper[i]:.6g}]")
    h0 = barrier_from_state(kinematic_state(chain, config.initial_q), scene).value
    if h0 < 0:
        raise ConfigError("initial_q", f"start state is unsafe (h = {h0:.6g} m)")
    return chain, scene


def config_from_doc(doc: dict, base_dir: str | Path | None = None) -> ScenarioConfig:
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    fdoc = doc.get("filter", {}) or {}
    if not isinstance(fdoc, dict):
        raise ConfigError("filter", "expected a mapping")
    try:
        params = FilterParams.from_doc(fdoc)
    except (TypeError, ValueError) as exc:
        raise ConfigError("filter", str(exc)) from None
    try:
        return ScenarioConfig(
            chain_path=str(require(doc, "chain", "")),
            scene_path=str(require(doc, "scene", "")),
            initial_q=as_vector(require(doc, "initial_q", ""), N_JOINTS, "initial_q"),
            policy=policy_from_doc(require(doc, "policy", "")),
            steps=int(require(doc, "steps", "")),
            substeps_per_action=int(doc.get("substeps_per_action", 10)),
            filter=params,
            filter_enabled=bool(doc.get("filter_enabled", True)),
            seed=int(doc.get("seed", 0)),
            name=str(doc.get("name", "scenario")),
            notes=str(doc.get("notes", "")),
            base_dir=None if base_dir is None else str(base_dir),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("", str(exc)) from None


def load_scenario(source: str | Path | dict, validate: bool = True) -> ScenarioConfig:
    doc, base = read_document(source)
    config = config_from_doc(doc, base)
    if validate:
        validate_config(config)
    return config


def save_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dump_document(config.to_doc()))


# -- episode log ---------------------------------------------------------------

RECORD_FIELDS = (
    "step", "substep", "q", "ee_position", "barrier", "active_pair",
    "intervened", "tracking_error", "gripper", "status",
)


@dataclass(frozen=True)
class StepRecord:
    """State after one substep."""

    step: int
    substep: int
    q: tuple
    ee_position: tuple
    barrier: float
    active_pair: tuple | None
    intervened: bool
    tracking_error: float
    gripper: int
    status: str

    def to_doc(self) -> dict:
        return {
            "step": self.step,
            "substep": self.substep,
            "q": list(self.q),
            "ee_position": list(self.ee_position),
            "barrier": self.barrier,
            "active_pair": None if self.active_pair is None else list(self.active_pair),
            "intervened": self.intervened,
            "tracking_error": self.tracking_error,
            "gripper": self.gripper,
            "status": self.status,
        }

    @classmethod
    def from_doc(cls, d: dict) -> StepRecord:
        pair = d["active_pair"]
        return cls(int(d["step"]), int(d["substep"]), tuple(d["q"]), tuple(d["ee_position"]), _num(d["barrier"]),
                   None if pair is None else tuple(pair), bool(d["intervened"]), float(d["tracking_error"]),
                   int(d["gripper"]), str(d["status"]))


def _num(v) -> float:
    # JSON has no infinity literal; logs write it as a string
    return float(v)


def _jnum(v: float):
    return v if np.isfinite(v) else repr(v)


def summarize(records: list[StepRecord]) -> dict:
    """Summary statistics, computed from the records alone."""
    n = len(records)
    barriers = [r.barrier for r in records]
    return {
        "min_barrier": min(barriers) if n else float("inf"),
        "violation_count": sum(1 for h in barriers if h < -VIOLATION_TOL),
        "intervention_rate": sum(1 for r in records if r.intervened) / n if n else 0.0,
        "mean_tracking_error": sum(r.tracking_error for r in records) / n if n else 0.0,
        "final_ee_position": list(records[-1].ee_position) if n else None,
        "filter_errors": sum(1 for r in records if r.status == STATUS_FILTER_ERROR),
    }


@dataclass(frozen=True, eq=False)
class EpisodeLog:
    scenario: str
    config_digest: str
    scenario_digest: str
    seed: int
    filter_enabled: bool
    initial_q: tuple
    initial_barrier: float
    records: list[StepRecord]
    summary: dict

    @property
    def violations(self) -> int:
        return self.summary["violation_count"]

    def to_doc(self) -> dict:
        summary = dict(self.summary)
        summary["min_barrier"] = _jnum(summary["min_barrier"])
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "config_digest": self.config_digest,
            "scenario_digest": self.scenario_digest,
            "seed": self.seed,
            "filter_enabled": self.filter_enabled,
            "initial_q": list(self.initial_q),
            "initial_barrier": _jnum(self.initial_barrier),
            "summary": summary,
            "records": [dict(r.to_doc(), barrier=_jnum(r.barrier)) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":")) + "\n"

    def to_csv(self) -> str:
        """One row per substep; q and ee_position are split into columns."""
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["# schema_version", SCHEMA_VERSION, "scenario", self.scenario, "config_digest", self.config_digest])
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            pair = "" if r.active_pair is None else f"{r.active_pair[0]}|{r.active_pair[1]}"
            w.writerow([r.step, r.substep, *map(repr, r.q), *map(repr, r.ee_position), repr(r.barrier), pair,
                        int(r.intervened), repr(r.tracking_error), r.gripper, r.status])
        return out.getvalue()

    def write(self, path: str | Path, fmt: str = "json") -> Path:
        path = Path(path)
        if fmt == "json":
            path.write_text(self.to_json())
        elif fmt == "csv":
            path.write_text(self.to_csv())
        else:
            raise ValueError(f"unknown log format {fmt!r}")
        return path

    @classmethod
    def from_doc(cls, doc: dict) -> EpisodeLog:
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported log version {doc.get('schema_version')!r}")
        summary = dict(doc["summary"])
        summary["min_barrier"] = _num(summary["min_barrier"])
        return cls(doc["scenario"], doc["config_digest"], doc["scenario_digest"], int(doc["seed"]), bool(doc["filter_enabled"]),
                   tuple(doc["initial_q"]), _num(doc["initial_barrier"]), [StepRecord.from_doc(r) for r in doc["records"]], summary)

    @classmethod
    def from_json(cls, text: str) -> EpisodeLog:
        return cls.from_doc(json.loads(text))

    @classmethod
    def read(cls, path: str | Path) -> EpisodeLog:
        try:
            return cls.from_json(Path(path).read_text())
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError("", f"cannot read episode log {path}: {exc}") from None


CSV_COLUMNS = (
    ["step", "substep"] + [f"q{i}" for i in range(N_JOINTS)] + ["ee_x", "ee_y", "ee_z"]
    + ["barrier", "active_pair", "intervened", "tracking_error", "gripper", "status"]
)


# -- rollout -------------------------------------------------------------------

def run_episode(config: ScenarioConfig, chain: KinematicChain | None = None, scene: CollisionScene | None = None) -> EpisodeLog:
    """Roll out ``config``; the log has ``steps * substeps_per_action`` records."""
    if chain is None or scene is None:
        chain, scene = validate_config(config)
    return run_lockstep([config], chain, scene)[0]


def _lockstep_key(config: ScenarioConfig, chain_ref: str, scene_ref: str) -> tuple:
    return (chain_ref, scene_ref, config.steps, config.substeps_per_action, config.filter_enabled,
            tuple(sorted(config.filter.to_doc().items())))


def run_lockstep(configs, chain: KinematicChain, scene: CollisionScene) -> list[EpisodeLog]:
    """Advance several episodes together on one chain and scene.

    All configs must agree on steps, substeps, filter parameters and the
    filter flag. Each episode keeps its own QP workspace, policy and seed,
    so its log is the same as when it runs alone.
    """
    configs = list(configs)
    c0 = configs[0]
    if len({(c.steps, c.substeps_per_action, c.filter_enabled, c.filter) for c in configs}) != 1:
        raise ValueError("lockstep episodes must share steps, substeps and filter settings")
    E = len(configs)
    params, n_sub = c0.filter, c0.substeps_per_action
    workspaces = [QpWorkspace(params.qp_tol, params.qp_max_iter) for _ in range(E)]

    Q = np.array([c.initial_q for c in configs], dtype=float)
    st = kinematic_state(chain, Q)
    bars = barrier_batch(st, scene)
    initial = [float(b.value) for b in bars]
    records: list[list[StepRecord]] = [[] for _ in range(E)]
    eye = np.eye(N_JOINTS)
    for step in range(c0.steps):
        flange = st.positions[:, FLANGE]
        subs = [c.policy.action(step, flange[e].copy(), c.seed).scaled(1.0 / n_sub) for e, c in enumerate(configs)]
        U = np.array([a.twist for a in subs])
        for k in range(n_sub):
            if c0.filter_enabled:
                out = filter_step(chain, scene, Q, subs, params, workspaces, bars, st)
                DQ = np.zeros((E, N_JOINTS))
                err = np.empty(E)
                flags, status = [True] * E, [STATUS_FILTER_ERROR] * E
                for e, res in enumerate(out.results):
                    if res is None:
                        err[e] = float(np.linalg.norm(U[e]))
                        continue
                    DQ[e], err[e], flags[e], status[e] = res.dq_safe, res.tracking_error, res.intervened, res.status
                st, bars = out.state_after, out.barriers_after
            else:
                J = _jacobian_from_state(st)
                Jt = np.swapaxes(J, 1, 2)
                DQ = np.linalg.solve(Jt @ J + params.lam * eye, Jt @ U[:, :, None])[:, :, 0]
                err = np.linalg.norm((J @ DQ[:, :, None])[:, :, 0] - U, axis=1)
                flags, status = [False] * E, [STATUS_RAW] * E
                st = kinematic_state(chain, Q + DQ)
                bars = barrier_batch(st, scene)
            Q = Q + DQ
            q_rows = Q.tolist()
            ee_rows = st.positions[:, FLANGE].tolist()
            for e in range(E):
                bar = bars[e]
                records[e].append(StepRecord(step, k, tuple(q_rows[e]), tuple(ee_rows[e]), float(bar.value), bar.active_pair,
                                             bool(flags[e]), float(err[e]), subs[e].gripper, status[e]))
    return [
        EpisodeLog(
            scenario=c.name,
            config_digest=c.digest(),
            scenario_digest=c.digest(include_filter_flag=False),
            seed=c.seed,
            filter_enabled=c.filter_enabled,
            initial_q=tuple(c.initial_q.tolist()),
            initial_barrier=initial[e],
            records=records[e],
            summary=summarize(records[e]),
        )
        for e, c in enumerate(configs)
    ]


def _run_group(job) -> list[EpisodeLog]:
    configs = job
    chain, scene = validate_config(configs[0])
    for c in configs[1:]:
        validate_config(c)
    return run_lockstep(configs, chain, scene)


def run_batch(configs, jobs: int = 1, lockstep: int = 128) -> list[EpisodeLog]:
    """Run independent episodes and return their logs in input order.

    Episodes that share a chain, scene and schedule advance in lockstep
    (at most ``lockstep`` at a time); ``jobs > 1`` spreads those groups
    over worker processes.
    """
    configs = list(configs)
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(configs):
        base = None if c.base_dir is None else Path(c.base_dir)
        key = _lockstep_key(c, str(resolve(c.chain_path, base)), str(resolve(c.scene_path, base)))
        groups.setdefault(key, []).append(i)
    chunks = []
    for idx in groups.values():
        size = max(1, min(lockstep, -(-len(idx) // max(1, jobs))))
        chunks.extend(idx[i:i + size] for i in range(0, len(idx), size))
    work = [[configs[i] for i in chunk] for chunk in chunks]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_group, work))
    else:
        outputs = [_run_group(w) for w in work]
    logs: list = [None] * len(configs)
    for chunk, out in zip(chunks, outputs):
        for i, log in zip(chunk, out):
            logs[i] = log
    return logs


# -- comparison ----------------------------------------------------------------

class ComparisonError(ValueError):
    pass


COMPARE_FIELDS = ("min_barrier", "violation_count", "mean_tracking_error", "intervention_rate")


@dataclass(frozen=True)
class ComparisonReport:
    scenario: str
    with_filter: dict
    without_filter: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "with_filter": {k: _jnum(self.with_filter[k]) if k == "min_barrier" else self.with_filter[k] for k in COMPARE_FIELDS},
            "without_filter": {k: _jnum(self.without_filter[k]) if k == "min_barrier" else self.without_filter[k] for k in COMPARE_FIELDS},
        }

    def render_text(self) -> str:
        rows = [f"scenario: {self.scenario}", f"{'metric':<22}{'with filter':>16}{'without filter':>16}"]
        for k in COMPARE_FIELDS:
            a, b = self.with_filter[k], self.without_filter[k]
            fmt = (lambda v: f"{v:>16d}") if k == "violation_count" else (lambda v: f"{v:>16.6g}")
            rows.append(f"{k:<22}{fmt(a)}{fmt(b)}")
        return "\n".join(rows) + "\n"


def compare_runs(with_filter: EpisodeLog, without_filter: EpisodeLog) -> ComparisonReport:
    """Side-by-side summary of a filtered and an unfiltered run of one scenario."""
    if with_filter.scenario_digest != without_filter.scenario_digest:
        raise ComparisonError("logs come from different scenario configurations")
    if not with_filter.filter_enabled or without_filter.filter_enabled:
        raise ComparisonError("expected one run with the filter enabled and one without")
    return ComparisonReport(with_filter.scenario, dict(with_filter.summary), dict(without_filter.summary))
