"""Collision-sphere scenes and the collision barrier h(q).

The barrier is the smallest clearance between any robot collision sphere
and any static obstacle, minus a scene margin:

    h(q) = min_{s, o} [ sd_o(c_s(q)) - r_s ] - margin

where ``sd_o`` is the signed distance to obstacle ``o`` and ``c_s(q)`` the
world center of sphere ``s``. The gradient of a pair is the obstacle's
distance-field direction pulled back through the sphere center's point
Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .config import ConfigError, as_float, as_vector, read_document, require, resolve
from .kinematics import FLANGE, N_JOINTS, KinematicChain, KinematicState, cross, kinematic_state

UNIT_TOL = 1e-9
TIE_TOL = 1e-12
_UP = np.array([0.0, 0.0, 1.0])


def _vec3(v, name: str) -> np.ndarray:
    v = np.array(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    v.flags.writeable = False
    return v


def _positive(x, name: str) -> float:
    x = float(x)
    if not x > 0.0 or not np.isfinite(x):
        raise ValueError(f"{name} must be positive, got {x}")
    return x


def _sign(x: np.ndarray) -> np.ndarray:
    # sign with sign(0) = +1
    return np.where(x < 0.0, -1.0, 1.0)


# Distance fields. Each takes points (S, 3) and parameters stacked over B
# obstacles of one kind, and returns distances (S, B) and unit
# directions (S, B, 3). Where the direction is undefined it is +z.

def _halfspace_field(points, normal, offset):
    d = points @ normal.T - offset
    return d, np.broadcast_to(normal, d.shape + (3,))


def _box_field(points, center, half_extents):
    rel = points[:, None, :] - center
    s = _sign(rel)
    excess = np.abs(rel) - half_extents
    outside = np.maximum(excess, 0.0)
    out_norm = np.sqrt(np.einsum("sbk,sbk->sb", outside, outside))
    is_out = out_norm > 0.0
    d = np.where(is_out, out_norm, excess.max(axis=2))
    grad_out = s * outside / np.where(is_out, out_norm, 1.0)[..., None]
    # inside: push out through the nearest face (first axis on ties)
    face = excess.argmax(axis=2)
    grad_in = s * (face[..., None] == np.arange(3))
    grad_in[np.all(rel == 0.0, axis=2)] = _UP
    return d, np.where(is_out[..., None], grad_out, grad_in)


def _cylinder_field(points, axis_point, radius, half_height):
    rel = points[:, None, :] - axis_point
    rho = np.hypot(rel[..., 0], rel[..., 1])
    on_axis = rho == 0.0
    radial = np.zeros_like(rel)
    radial[..., :2] = rel[..., :2] / np.where(on_axis, 1.0, rho)[..., None]
    sz = _sign(rel[..., 2])
    dr = rho - radius
    dz = np.abs(rel[..., 2]) - half_height
    wr, wz = np.maximum(dr, 0.0), np.maximum(dz, 0.0)
    out_norm = np.hypot(wr, wz)
    is_out = out_norm > 0.0
    d = np.where(is_out, out_norm, np.maximum(dr, dz))
    axial = sz[..., None] * _UP
    grad_out = (wr[..., None] * radial + wz[..., None] * axial) / np.where(is_out, out_norm, 1.0)[..., None]
    side = dr >= dz
    grad_in = np.where(side[..., None], radial, axial)
    grad_in[side & on_axis] = _UP
    return d, np.where(is_out[..., None], grad_out, grad_in)


def _sphere_field(points, center, radius):
    rel = points[:, None, :] - center
    n = np.sqrt(np.einsum("sbk,sbk->sb", rel, rel))
    at_center = n == 0.0
    grad = rel / np.where(at_center, 1.0, n)[..., None]
    grad[at_center] = _UP
    return n - radius, grad


class _Field:
    """Shared single-obstacle wrapper around the batched field."""

    def distance(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Signed distance and its gradient for points (N, 3)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        d, g = self._field(points, *self._stacked([self]))
        return d[:, 0], np.array(g[:, 0])


@dataclass(frozen=True, eq=False)
class HalfSpace(_Field):
    """Free space is ``normal . x >= offset``; the obstacle is the other side."""

    normal: np.ndarray
    offset: float
    id: str
    kind = "halfspace"
    _field = staticmethod(_halfspace_field)

    def __post_init__(self):
        n = _vec3(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise ValueError(f"halfspace {self.id}: normal must have unit norm")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @staticmethod
    def _stacked(items):
        return np.array([o.normal for o in items]), np.array([o.offset for o in items])

    def params(self) -> dict:
        return {"normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Box(_Field):
    """Axis-aligned solid box."""

    center: np.ndarray
    half_extents: np.ndarray
    id: str
    kind = "box"
    _field = staticmethod(_box_field)

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        e = _vec3(self.half_extents, "half_extents")
        if not np.all(e > 0.0):
            raise ValueError(f"box {self.id}: half_extents must be positive")
        object.__setattr__(self, "half_extents", e)

    @staticmethod
    def _stacked(items):
        return np.array([o.center for o in items]), np.array([o.half_extents for o in items])

    def params(self) -> dict:
        return {"center": self.center.tolist(), "half_extents": self.half_extents.tolist()}


@dataclass(frozen=True, eq=False)
class VerticalCylinder(_Field):
    """Solid capped cylinder with a vertical axis through ``axis_point`` (its center)."""

    axis_point: np.ndarray
    radius: float
    half_height: float
    id: str
    kind = "cylinder"
    _field = staticmethod(_cylinder_field)

    def __post_init__(self):
        object.__setattr__(self, "axis_point", _vec3(self.axis_point, "axis_point"))
        object.__setattr__(self, "radius", _positive(self.radius, "radius"))
        object.__setattr__(self, "half_height", _positive(self.half_height, "half_height"))

    @staticmethod
    def _stacked(items):
        return (np.array([o.axis_point for o in items]), np.array([o.radius for o in items]),
                np.array([o.half_height for o in items]))

    def params(self) -> dict:
        return {"axis_point": self.axis_point.tolist(), "radius": self.radius, "half_height": self.half_height}


@dataclass(frozen=True, eq=False)
class SphereObstacle(_Field):
    center: np.ndarray
    radius: float
    id: str
    kind = "sphere"
    _field = staticmethod(_sphere_field)

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "radius", _positive(self.radius, "radius"))

    @staticmethod
    def _stacked(items):
        return np.array([o.center for o in items]), np.array([o.radius for o in items])

    def params(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}


Obstacle = Union[HalfSpace, Box, VerticalCylinder, SphereObstacle]


@dataclass(frozen=True, eq=False)
class CollisionSphere:
    link_index: int
    local_center: np.ndarray
    radius: float
    id: str

    def __post_init__(self):
        if int(self.link_index) != self.link_index or not 0 <= self.link_index <= FLANGE:
            raise ValueError(f"sphere {self.id}: link_index must be in 0..{FLANGE}")
        object.__setattr__(self, "link_index", int(self.link_index))
        object.__setattr__(self, "local_center", _vec3(self.local_center, "local_center"))
        object.__setattr__(self, "radius", _positive(self.radius, "radius"))


@dataclass(frozen=True, eq=False)
class CollisionScene:
    spheres: tuple[CollisionSphere, ...]
    obstacles: tuple[Obstacle, ...] = ()
    margin: float = 0.0
    name: str = "scene"
    notes: str = field(default="", repr=False)

    def __post_init__(self):
        spheres, obstacles = tuple(self.spheres), tuple(self.obstacles)
        for label, items in (("sphere", spheres), ("obstacle", obstacles)):
            ids = [it.id for it in items]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate {label} id in scene {self.name}")
        margin = float(self.margin)
        if not margin >= 0.0:
            raise ValueError("margin must be >= 0")
        object.__setattr__(self, "spheres", spheres)
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "margin", margin)
        object.__setattr__(self, "_links", np.array([s.link_index for s in spheres], dtype=int))
        object.__setattr__(self, "_local", np.array([s.local_center for s in spheres]).reshape(-1, 3))
        object.__setattr__(self, "_radii", np.array([s.radius for s in spheres]))
        object.__setattr__(self, "_sphere_ids", tuple(s.id for s in spheres))
        object.__setattr__(self, "_obstacle_ids", tuple(o.id for o in obstacles))
        groups = {}
        for j, o in enumerate(obstacles):
            groups.setdefault(type(o), []).append(j)
        object.__setattr__(self, "_groups", tuple(
            (cls._field, np.array(cols), cls._stacked([obstacles[j] for j in cols])) for cls, cols in groups.items()
        ))
        # (S, 7) mask of joints that move each sphere
        mask = np.arange(N_JOINTS)[None, :] <= np.minimum(self._links, N_JOINTS - 1)[:, None]
        object.__setattr__(self, "_joint_mask", mask)

    def with_obstacles(self, obstacles, name: str | None = None) -> CollisionScene:
        return CollisionScene(self.spheres, tuple(obstacles), self.margin, name or self.name, self.notes)

    def with_margin(self, margin: float) -> CollisionScene:
        return CollisionScene(self.spheres, self.obstacles, margin, self.name, self.notes)

    def sphere_centers(self, chain: KinematicChain, q) -> np.ndarray:
        st = kinematic_state(chain, q)
        return np.einsum("...kij,kj->...ki", st.rotations[..., self._links, :, :], self._local) + st.positions[..., self._links, :]


class PairDistance(NamedTuple):
    distance: float
    direction: np.ndarray


class PairValue(NamedTuple):
    pair: tuple[str, str]
    value: float
    gradient: np.ndarray


@dataclass(frozen=True, eq=False)
class BarrierEvaluation:
    """Barrier value, gradient and the full (sphere x obstacle) table.

    ``pair_values[s, o]`` and ``pair_gradients[s, o]`` hold every pair's
    clearance (margin already subtracted) and its gradient over q.
    """

    value: float
    gradient: np.ndarray
    active_pair: tuple[str, str] | None
    pair_values: np.ndarray
    pair_gradients: np.ndarray
    sphere_ids: tuple[str, ...]
    obstacle_ids: tuple[str, ...]

    @property
    def per_pair(self) -> list[PairValue]:
        return [
            PairValue((sid, oid), float(self.pair_values[i, j]), self.pair_gradients[i, j])
            for i, sid in enumerate(self.sphere_ids)
            for j, oid in enumerate(self.obstacle_ids)
        ]

    def pair_id(self, s: int, o: int) -> tuple[str, str]:
        return self.sphere_ids[s], self.obstacle_ids[o]


def pair_distance(sphere_world_center, sphere_radius: float, obstacle: Obstacle) -> PairDistance:
    """Clearance between one sphere and one obstacle.

    ``distance`` is the signed distance from the sphere center to the
    obstacle surface minus the sphere radius (negative when penetrating);
    ``direction`` is the unit gradient of that distance, pointing away
    from the obstacle. Points on a distance-field singularity get +z.
    """
    c = np.asarray(sphere_world_center, dtype=float).reshape(1, 3)
    d, g = obstacle.distance(c)
    return PairDistance(float(d[0]) - float(sphere_radius), g[0])


def evaluate_barrier(chain: KinematicChain, q, scene: CollisionScene, smoothing_beta: float | None = None) -> BarrierEvaluation:
    """Evaluate h(q) and its gradient.

    By default ``value`` is the hard minimum over pairs and ``gradient``
    the gradient of the active pair; pairs within 1e-12 of the minimum are
    tie-broken by lexicographic (sphere id, obstacle id). With
    ``smoothing_beta`` set, value and gradient come from the log-sum-exp
    soft minimum at that temperature instead (the active pair is still
    the hard-min pair).
    """
    return barrier_from_state(kinematic_state(chain, q), scene, smoothing_beta)


def barrier_from_state(st: KinematicState, scene: CollisionScene, smoothing_beta: float | None = None) -> BarrierEvaluation:
    """``evaluate_barrier`` on an already computed forward pass."""
    values, grads = pair_tables(st, scene)
    return _assemble(values, grads, scene, smoothing_beta)


def barrier_batch(st: KinematicState, scene: CollisionScene) -> list[BarrierEvaluation]:
    """Hard-min evaluations for a stacked forward pass, one per entry."""
    values, grads = pair_tables(st, scene)
    return [_assemble(values[e], grads[e], scene, None) for e in range(values.shape[0])]


def pair_tables(st: KinematicState, scene: CollisionScene) -> tuple[np.ndarray, np.ndarray]:
    """Clearance (..., S, O) and gradient (..., S, O, 7) of every pair.

    Accepts a single or a stacked forward pass.
    """
    lead = st.axes.shape[:-2]
    n_s, n_o = len(scene.spheres), len(scene.obstacles)
    if n_s == 0 or n_o == 0:
        return np.zeros(lead + (n_s, n_o)), np.zeros(lead + (n_s, n_o, N_JOINTS))
    links = scene._links
    centers = np.einsum("...kij,kj->...ki", st.rotations[..., links, :, :], scene._local) + st.positions[..., links, :]
    # lever[s, j] = z_j x (c_s - p_j), zeroed for joints that do not move sphere s
    lever = cross(st.axes[..., None, :, :], centers[..., :, None, :] - st.origins[..., None, :, :])
    lever *= scene._joint_mask[:, :, None]

    flat = centers.reshape(-1, 3)
    values = np.empty((flat.shape[0], n_o))
    dirs = np.empty((flat.shape[0], n_o, 3))
    for fn, cols, params in scene._groups:
        values[:, cols], dirs[:, cols] = fn(flat, *params)
    values = values.reshape(lead + (n_s, n_o)) - (scene._radii + scene.margin)[:, None]
    grads = np.einsum("...sjk,...sok->...soj", lever, dirs.reshape(lead + (n_s, n_o, 3)))
    return values, grads


def _assemble(values: np.ndarray, grads: np.ndarray, scene: CollisionScene, smoothing_beta: float | None) -> BarrierEvaluation:
    sphere_ids, obstacle_ids = scene._sphere_ids, scene._obstacle_ids
    if values.size == 0:
        return BarrierEvaluation(np.inf, np.zeros(N_JOINTS), None, values, grads, sphere_ids, obstacle_ids)
    flat = values.ravel()
    k = int(flat.argmin())
    vmin = flat[k]
    ties = np.flatnonzero(flat <= vmin + TIE_TOL)
    n_o = values.shape[1]
    if ties.size > 1:
        k = min(ties.tolist(), key=lambda t: (sphere_ids[t // n_o], obstacle_ids[t % n_o]))
    s, o = divmod(k, n_o)
    active = (sphere_ids[s], obstacle_ids[o])

    if smoothing_beta is None:
        value, gradient = float(values[s, o]), grads[s, o].copy()
    else:
        beta = _positive(smoothing_beta, "smoothing_beta")
        w = np.exp(-beta * (values - vmin))
        total = w.sum()
        value = float(vmin - np.log(total) / beta)
        gradient = np.einsum("so,soj->j", w / total, grads)
    return BarrierEvaluation(value, gradient, active, values, grads, sphere_ids, obstacle_ids)


def barrier_value(chain: KinematicChain, q, scene: CollisionScene) -> float:
    return evaluate_barrier(chain, q, scene).value


# -- configuration files ---------------------------------------------------

def _obstacle_from_doc(doc, path: str) -> Obstacle:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    kind = require(doc, "kind", path)
    oid = str(require(doc, "id", path))
    try:
        if kind == "halfspace":
            return HalfSpace(as_vector(require(doc, "normal", path), 3, f"{path}.normal"), as_float(require(doc, "offset", path), f"{path}.offset"), oid)
        if kind == "box":
            return Box(as_vector(require(doc, "center", path), 3, f"{path}.center"), as_vector(require(doc, "half_extents", path), 3, f"{path}.half_extents"), oid)
        if kind == "cylinder":
            return VerticalCylinder(
                as_vector(require(doc, "axis_point", path), 3, f"{path}.axis_point"),
                as_float(require(doc, "radius", path), f"{path}.radius"),
                as_float(require(doc, "half_height", path), f"{path}.half_height"),
                oid,
            )
        if kind == "sphere":
            return SphereObstacle(as_vector(require(doc, "center", path), 3, f"{path}.center"), as_float(require(doc, "radius", path), f"{path}.radius"), oid)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown obstacle kind {kind!r}")


def _spheres_from_doc(items, path: str) -> list[CollisionSphere]:
    if not isinstance(items, list):
        raise ConfigError(path, "expected a list")
    out = []
    for i, sd in enumerate(items):
        p = f"{path}[{i}]"
        try:
            out.append(
                CollisionSphere(
                    int(require(sd, "link", p)),
                    as_vector(require(sd, "center", p), 3, f"{p}.center"),
                    as_float(require(sd, "radius", p), f"{p}.radius"),
                    str(require(sd, "id", p)),
                )
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(p, str(exc)) from None
    return out


def load_scene(source: str | Path | dict) -> CollisionScene:
    """Read a scene document.

    Spheres are listed under ``spheres`` or pulled from another document
    named by ``spheres_from`` (relative paths resolve against the scene
    file; ``pkg:`` points into package data).
    """
    doc, base = read_document(source)
    if "spheres" in doc:
        spheres = _spheres_from_doc(doc["spheres"], "spheres")
    elif "spheres_from" in doc:
        sub, _ = read_document(resolve(doc["spheres_from"], base))
        spheres = _spheres_from_doc(require(sub, "spheres", "spheres_from"), "spheres_from.spheres")
    else:
        raise ConfigError("spheres", "missing required field (or spheres_from)")
    obstacles_doc = doc.get("obstacles", []) or []
    if not isinstance(obstacles_doc, list):
        raise ConfigError("obstacles", "expected a list")
    obstacles = [_obstacle_from_doc(od, f"obstacles[{i}]") for i, od in enumerate(obstacles_doc)]
    margin = as_float(doc.get("margin", 0.0), "margin")
    try:
        return CollisionScene(tuple(spheres), tuple(obstacles), margin, str(doc.get("name", "scene")), str(doc.get("notes", "")))
    except ValueError as exc:
        raise ConfigError("", str(exc)) from None


def scene_to_doc(scene: CollisionScene, spheres_from: str | None = None) -> dict:
    doc: dict = {"schema_version": 1, "name": scene.name}
    if scene.notes:
        doc["notes"] = scene.notes
    if spheres_from is not None:
        doc["spheres_from"] = spheres_from
    else:
        doc["spheres"] = [
            {"id": s.id, "link": s.link_index, "center": s.local_center.tolist(), "radius": s.radius} for s in scene.spheres
        ]
    doc["margin"] = scene.margin
    doc["obstacles"] = [{"id": o.id, "kind": o.kind, **o.params()} for o in scene.obstacles]
    return doc
