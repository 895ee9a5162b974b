"""Forward kinematics and Jacobians for 7-joint revolute serial chains.

Frame convention: joint ``i`` first applies its fixed transform (relative
to the previous link frame), then rotates by ``q[i]`` about its local axis.
The resulting frame is link frame ``i`` (``i = 0..6``); frame ``7`` is the
flange, rigidly offset from link frame 6.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

from .config import ConfigError, as_vector, data_path, read_document, require

N_JOINTS = 7
N_FRAMES = N_JOINTS + 1
FLANGE = N_JOINTS

ORTHO_TOL = 1e-9
REFERENCE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation matrix plus translation (m)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("rigid transform entries must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation is not a proper orthonormal matrix")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rpy(cls, rpy, translation) -> RigidTransform:
        """Fixed-axis roll/pitch/yaw: ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
        return cls(Rotation.from_euler("xyz", rpy).as_matrix(), translation)

    @classmethod
    def from_matrix(cls, T) -> RigidTransform:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def rpy(self) -> np.ndarray:
        return Rotation.from_matrix(self.rotation).as_euler("xyz")

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def __repr__(self):
        return f"RigidTransform(rpy={self.rpy().round(6).tolist()}, translation={self.translation.round(6).tolist()})"


@dataclass(frozen=True, eq=False)
class JointLimits:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(N_JOINTS)
        hi = np.array(self.upper, dtype=float).reshape(N_JOINTS)
        bad = np.flatnonzero(~(lo < hi))
        if bad.size:
            raise ValueError(f"limit ordering violated at joint {int(bad[0])}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    axis: np.ndarray
    fixed: RigidTransform

    def __post_init__(self):
        a = np.array(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(a)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError(f"joint {self.name}: axis must be a nonzero finite vector")
        a = a / n
        a.flags.writeable = False
        object.__setattr__(self, "axis", a)


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Immutable description of a 7-joint revolute arm."""

    joints: tuple[Joint, ...]
    base: RigidTransform = field(default_factory=RigidTransform.identity)
    flange: RigidTransform = field(default_factory=RigidTransform.identity)
    limits: JointLimits | None = None
    name: str = "chain"

    def __post_init__(self):
        joints = tuple(self.joints)
        if len(joints) != N_JOINTS:
            raise ValueError(f"wrong joint count: expected {N_JOINTS}, got {len(joints)}")
        object.__setattr__(self, "joints", joints)
        if self.limits is None:
            object.__setattr__(self, "limits", JointLimits(np.full(N_JOINTS, -np.pi), np.full(N_JOINTS, np.pi)))
        # packed copies for the hot path
        axes = np.array([j.axis for j in joints])
        K = np.zeros((N_JOINTS, 3, 3))
        K[:, 0, 1], K[:, 0, 2], K[:, 1, 2] = -axes[:, 2], axes[:, 1], -axes[:, 0]
        K -= K.transpose(0, 2, 1)
        object.__setattr__(self, "_axes", axes)
        object.__setattr__(self, "_K", K)
        object.__setattr__(self, "_K2", K @ K)
        object.__setattr__(self, "_fixed_R", np.array([j.fixed.rotation for j in joints]))
        object.__setattr__(self, "_fixed_p", np.array([j.fixed.translation for j in joints]))
        object.__setattr__(self, "_eye", np.eye(3))
        object.__setattr__(self, "_base_T", self.base.matrix())
        object.__setattr__(self, "_flange_T", self.flange.matrix())

    @property
    def n_joints(self) -> int:
        return N_JOINTS

    def with_base(self, base: RigidTransform) -> KinematicChain:
        return replace(self, base=base)


class KinematicState(NamedTuple):
    """World-frame quantities from one forward pass."""

    rotations: np.ndarray  # (8, 3, 3) link frames 0..6, flange
    positions: np.ndarray  # (8, 3)
    axes: np.ndarray  # (7, 3) world joint axes z_i
    origins: np.ndarray  # (7, 3) world joint origins p_i


def joint_config(q) -> np.ndarray:
    """Validate a joint configuration: 7 finite angles (rad)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (N_JOINTS,):
        raise ValueError(f"joint configuration must have {N_JOINTS} entries, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint configuration entries must be finite")
    return q


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product over the last axis (np.cross without its overhead)."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def kinematic_state(chain: KinematicChain, q) -> KinematicState:
    """One forward pass at ``q``.

    ``q`` may also be a stack (E, 7) of configurations; every field then
    gains a leading axis of length E.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim <= 1:
        return state_at(kinematic_state(chain, joint_config(q)[None, :]), 0)
    if q.ndim != 2 or q.shape[1] != N_JOINTS:
        raise ValueError(f"joint configurations must have shape (E, {N_JOINTS}), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint configuration entries must be finite")
    E = q.shape[0]
    s, c = np.sin(q)[:, :, None, None], np.cos(q)[:, :, None, None]
    # per-joint homogeneous step: fixed transform, then rotation about the joint axis
    steps = np.zeros((E, N_JOINTS, 4, 4))
    steps[:, :, :3, :3] = chain._fixed_R @ (chain._eye + s * chain._K + (1.0 - c) * chain._K2)
    steps[:, :, :3, 3] = chain._fixed_p
    steps[:, :, 3, 3] = 1.0

    frames = np.empty((E, N_FRAMES, 4, 4))
    T = np.broadcast_to(chain._base_T, (E, 4, 4))
    for i in range(N_JOINTS):
        T = T @ steps[:, i]
        frames[:, i] = T
    frames[:, FLANGE] = T @ chain._flange_T
    rotations = frames[:, :, :3, :3]
    positions = frames[:, :, :3, 3]
    # a rotation about an axis leaves that axis fixed, so z_i = R_i a_i
    axes = np.einsum("ekij,kj->eki", rotations[:, :N_JOINTS], chain._axes)
    return KinematicState(rotations, positions, axes, positions[:, :N_JOINTS])


def state_at(st: KinematicState, e: int) -> KinematicState:
    """Entry ``e`` of a stacked forward pass."""
    return KinematicState(st.rotations[e], st.positions[e], st.axes[e], st.origins[e])


def forward_kinematics(chain: KinematicChain, q) -> list[RigidTransform]:
    """World poses of link frames 0..6 followed by the flange (8 transforms)."""
    st = kinematic_state(chain, q)
    return [RigidTransform(R, p) for R, p in zip(st.rotations, st.positions)]


def flange_pose(chain: KinematicChain, q) -> RigidTransform:
    st = kinematic_state(chain, q)
    return RigidTransform(st.rotations[FLANGE], st.positions[FLANGE])


def _jacobian_from_state(st: KinematicState) -> np.ndarray:
    # works on stacked states too: (..., 6, 7)
    lead = st.axes.shape[:-2]
    J = np.empty(lead + (6, N_JOINTS))
    J[..., :3, :] = np.swapaxes(cross(st.axes, st.positions[..., FLANGE, None, :] - st.origins), -1, -2)
    J[..., 3:, :] = np.swapaxes(st.axes, -1, -2)
    return J


def geometric_jacobian(chain: KinematicChain, q, frame: str = "world") -> np.ndarray:
    """6x7 flange Jacobian; rows are (linear, angular).

    ``frame="world"`` expresses both blocks in the base/world frame,
    ``frame="flange"`` rotates them into the current flange frame.
    """
    st = kinematic_state(chain, q)
    J = _jacobian_from_state(st)
    if frame == "world":
        return J
    if frame == "flange":
        Rt = st.rotations[FLANGE].T
        return np.vstack([Rt @ J[:3], Rt @ J[3:]])
    raise ValueError(f"unknown frame {frame!r}")


def _point_jacobian_from_state(st: KinematicState, link_index: int, local_point) -> tuple[np.ndarray, np.ndarray]:
    point = st.rotations[link_index] @ local_point + st.positions[link_index]
    Jp = np.zeros((3, N_JOINTS))
    n = min(link_index, N_JOINTS - 1) + 1
    Jp[:, :n] = cross(st.axes[:n], point - st.origins[:n]).T
    return point, Jp


def point_jacobian(chain: KinematicChain, q, link_index: int, local_point) -> np.ndarray:
    """3x7 linear Jacobian of a point fixed in frame ``link_index`` (0..7)."""
    if not (0 <= int(link_index) <= FLANGE) or int(link_index) != link_index:
        raise IndexError(f"link_index must be in 0..{FLANGE}, got {link_index}")
    local_point = np.asarray(local_point, dtype=float).reshape(3)
    if not np.all(np.isfinite(local_point)):
        raise ValueError("local_point must be finite")
    return _point_jacobian_from_state(kinematic_state(chain, q), int(link_index), local_point)[1]


def _transform_from_doc(doc, path: str) -> RigidTransform:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping with rotation_rpy and translation")
    rpy = as_vector(require(doc, "rotation_rpy", path), 3, f"{path}.rotation_rpy")
    t = as_vector(require(doc, "translation", path), 3, f"{path}.translation")
    return RigidTransform.from_rpy(rpy, t)


def load_chain(config_source: str | Path | dict, check_reference: bool = True) -> KinematicChain:
    """Build a chain from a YAML document (path, text, or parsed mapping).

    The document's ``reference`` block is checked against forward
    kinematics; a mismatch larger than 1e-6 m / 1e-6 rad is an error.
    """
    doc, _ = read_document(config_source)
    joints_doc = require(doc, "joints", "")
    if not isinstance(joints_doc, list):
        raise ConfigError("joints", "expected a list")
    if len(joints_doc) != N_JOINTS:
        raise ConfigError("joints", f"wrong joint count: expected {N_JOINTS}, got {len(joints_doc)}")
    joints = []
    for i, jd in enumerate(joints_doc):
        path = f"joints[{i}]"
        if not isinstance(jd, dict):
            raise ConfigError(path, "expected a mapping")
        if jd.get("type", "revolute") != "revolute":
            raise ConfigError(f"{path}.type", "only revolute joints are supported")
        axis = as_vector(require(jd, "axis", path), 3, f"{path}.axis")
        if np.linalg.norm(axis) == 0.0:
            raise ConfigError(f"{path}.axis", "axis must be nonzero")
        joints.append(Joint(str(jd.get("name", f"joint{i}")), axis, _transform_from_doc(require(jd, "fixed_transform", path), f"{path}.fixed_transform")))

    limits_doc = require(doc, "limits", "")
    lower = as_vector(require(limits_doc, "lower", "limits"), N_JOINTS, "limits.lower")
    upper = as_vector(require(limits_doc, "upper", "limits"), N_JOINTS, "limits.upper")
    for i in range(N_JOINTS):
        if not lower[i] < upper[i]:
            raise ConfigError(f"limits.lower[{i}]", f"limit ordering violated: lower {lower[i]} >= upper {upper[i]}")

    base = _transform_from_doc(doc["base"], "base") if "base" in doc else RigidTransform.identity()
    flange = _transform_from_doc(doc["flange"], "flange") if "flange" in doc else RigidTransform.identity()
    chain = KinematicChain(tuple(joints), base, flange, JointLimits(lower, upper), str(doc.get("name", "chain")))

    if check_reference and "reference" in doc:
        ref = doc["reference"]
        q_ref = as_vector(require(ref, "q", "reference"), N_JOINTS, "reference.q")
        want = _transform_from_doc(require(ref, "flange_pose", "reference"), "reference.flange_pose")
        got = flange_pose(chain, q_ref)
        dp = np.linalg.norm(got.translation - want.translation)
        dr = Rotation.from_matrix(want.rotation.T @ got.rotation).magnitude()
        if dp > REFERENCE_TOL or dr > REFERENCE_TOL:
            raise ConfigError("reference.flange_pose", f"forward kinematics mismatch: {dp:.3g} m, {dr:.3g} rad")
    return chain


@lru_cache(maxsize=None)
def panda_chain() -> KinematicChain:
    """The shipped Franka Panda chain."""
    return load_chain(data_path("chains", "panda.yaml"))
