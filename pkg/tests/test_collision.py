import numpy as np
import pytest
from hypothesis import given, strategies as st

from cbfshield.collision import (
    Box,
    CollisionScene,
    CollisionSphere,
    HalfSpace,
    SphereObstacle,
    VerticalCylinder,
    evaluate_barrier,
    load_scene,
    pair_distance,
    scene_to_doc,
)
from cbfshield.config import ConfigError
from cbfshield.kinematics import kinematic_state, panda_chain, point_jacobian
from conftest import random_q
from oracles import box_surface_samples, central_difference


def mixed_scene(spheres):
    return CollisionScene(spheres.spheres, (
        HalfSpace((0, 0, 1), -0.1, "floor"),
        Box((0.6, 0.3, 0.2), (0.1, 0.08, 0.2), "crate"),
        VerticalCylinder((0.5, -0.4, 0.3), 0.06, 0.3, "post"),
        SphereObstacle((-0.4, 0.2, 0.7), 0.1, "ball"),
    ), margin=0.01)


# -- pair_distance -------------------------------------------------------------

def test_plane_example():
    d = pair_distance([0, 0, 0.10], 0.03, HalfSpace((0, 0, 1), 0.0, "p"))
    assert d.distance == pytest.approx(0.07, abs=1e-15)
    np.testing.assert_array_equal(d.direction, [0, 0, 1])


@pytest.mark.parametrize("axis", range(3))
@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_box_face_example(axis, sign):
    box = Box((0.3, -0.2, 0.5), (0.1, 0.2, 0.15), "b")
    n = np.zeros(3)
    n[axis] = sign
    center = box.center + n * (box.half_extents[axis] + 0.05)
    d = pair_distance(center, 0.01, box)
    assert d.distance == pytest.approx(0.04, abs=1e-12)
    np.testing.assert_allclose(d.direction, n, atol=1e-12)


def test_box_against_surface_sampling(rng):
    worst = 0.0
    for _ in range(200):
        center = rng.uniform(-0.5, 0.5, 3)
        half = rng.uniform(0.02, 0.12, 3)
        box = Box(center, half, "b")
        c = center + rng.uniform(-0.4, 0.4, 3)
        r = rng.uniform(0.01, 0.05)
        surf = box_surface_samples(center, half, 100_000, rng)
        inside = np.all(np.abs(c - center) < half)
        nearest = np.min(np.linalg.norm(surf - c, axis=1))
        oracle = (-nearest if inside else nearest) - r
        worst = max(worst, abs(pair_distance(c, r, box).distance - oracle))
    assert worst < 2e-3


def test_box_interior_is_negative():
    box = Box((0, 0, 0), (0.1, 0.2, 0.3), "b")
    d = pair_distance([0.05, 0.0, 0.0], 0.0, box)
    assert d.distance == pytest.approx(-0.05)
    np.testing.assert_allclose(d.direction, [1, 0, 0])


def test_singularities_default_to_up():
    for ob in (Box((1, 2, 3), (0.1, 0.1, 0.1), "b"), SphereObstacle((1, 2, 3), 0.2, "s")):
        np.testing.assert_array_equal(pair_distance([1, 2, 3], 0.01, ob).direction, [0, 0, 1])
    cyl = VerticalCylinder((1, 2, 3), 0.1, 1.0, "c")
    np.testing.assert_array_equal(pair_distance([1, 2, 3], 0.01, cyl).direction, [0, 0, 1])


def test_cylinder_side_and_cap():
    cyl = VerticalCylinder((0, 0, 0), 0.1, 0.2, "c")
    side = pair_distance([0.3, 0, 0.05], 0.0, cyl)
    assert side.distance == pytest.approx(0.2)
    np.testing.assert_allclose(side.direction, [1, 0, 0])
    cap = pair_distance([0.05, 0, 0.5], 0.0, cyl)
    assert cap.distance == pytest.approx(0.3)
    np.testing.assert_allclose(cap.direction, [0, 0, 1])
    rim = pair_distance([0.4, 0, 0.6], 0.0, cyl)
    assert rim.distance == pytest.approx(0.5)
    np.testing.assert_allclose(rim.direction, [0.6, 0, 0.8])


def test_direction_is_distance_gradient(rng):
    obstacles = [
        Box((0, 0, 0), (0.1, 0.2, 0.3), "b"),
        VerticalCylinder((0, 0, 0), 0.1, 0.2, "c"),
        SphereObstacle((0, 0, 0), 0.1, "s"),
        HalfSpace(np.array([1, 2, 2]) / 3.0, 0.1, "h"),
    ]
    for ob in obstacles:
        for _ in range(20):
            c = rng.uniform(-0.6, 0.6, 3)
            g = central_difference(lambda x: [pair_distance(x, 0.0, ob).distance], c)[0]
            np.testing.assert_allclose(pair_distance(c, 0.0, ob).direction, g, atol=1e-6)


def test_obstacle_validation():
    with pytest.raises(ValueError):
        HalfSpace((0, 0, 1.001), 0.0, "h")
    with pytest.raises(ValueError):
        Box((0, 0, 0), (0.1, 0.0, 0.1), "b")
    with pytest.raises(ValueError):
        VerticalCylinder((0, 0, 0), -0.1, 0.1, "c")
    with pytest.raises(ValueError):
        CollisionSphere(8, (0, 0, 0), 0.1, "s")
    with pytest.raises(ValueError):
        CollisionSphere(1, (0, 0, 0), 0.0, "s")


def test_scene_rejects_duplicate_ids(spheres_scene):
    with pytest.raises(ValueError, match="duplicate"):
        spheres_scene.with_obstacles([HalfSpace((0, 0, 1), 0, "w"), HalfSpace((1, 0, 0), 0, "w")])


# -- evaluate_barrier ---------------------------------------------------------

def test_single_sphere_floor_example(chain):
    scene = CollisionScene((CollisionSphere(0, (0, 0, -0.133), 0.05, "s"),),
                           (HalfSpace((0, 0, 1), 0.0, "floor"),), margin=0.02)
    q = random_q(np.random.default_rng(1), chain)
    ev = evaluate_barrier(chain, q, scene)
    assert ev.value == pytest.approx(0.13, abs=1e-12)
    assert ev.active_pair == ("s", "floor")


def test_barrier_gradient_finite_differences(chain, spheres_scene, rng):
    scene = mixed_scene(spheres_scene)
    h = 1e-6
    checked = 0
    while checked < 50:
        q = random_q(rng, chain)
        ev = evaluate_barrier(chain, q, scene)
        if ev.value < 0:
            continue
        stable = True
        fd = np.empty(7)
        for i in range(7):
            e = np.zeros(7)
            e[i] = h
            up, dn = evaluate_barrier(chain, q + e, scene), evaluate_barrier(chain, q - e, scene)
            stable &= up.active_pair == ev.active_pair == dn.active_pair
            fd[i] = (up.value - dn.value) / (2 * h)
        if not stable:
            continue
        assert np.max(np.abs(fd - ev.gradient)) < 1e-4
        checked += 1


def test_pair_gradient_matches_point_jacobian(chain, spheres_scene, rng):
    scene = mixed_scene(spheres_scene)
    q = random_q(rng, chain)
    ev = evaluate_barrier(chain, q, scene)
    centers = scene.sphere_centers(chain, q)
    for s, sph in enumerate(scene.spheres):
        Jp = point_jacobian(chain, q, sph.link_index, sph.local_center)
        for o, ob in enumerate(scene.obstacles):
            pd = pair_distance(centers[s], sph.radius, ob)
            assert ev.pair_values[s, o] == pytest.approx(pd.distance - scene.margin, abs=1e-14)
            np.testing.assert_allclose(ev.pair_gradients[s, o], pd.direction @ Jp, atol=1e-14)


def test_duplicate_obstacle_tie_break(chain, spheres_scene, rng):
    scene = spheres_scene.with_obstacles([HalfSpace((0, 0, 1), -0.2, "zz"), HalfSpace((0, 0, 1), -0.2, "aa")])
    q = random_q(rng, chain)
    ev = evaluate_barrier(chain, q, scene)
    single = evaluate_barrier(chain, q, spheres_scene.with_obstacles([HalfSpace((0, 0, 1), -0.2, "zz")]))
    assert ev.value == single.value
    assert ev.active_pair[1] == "aa"


def test_no_obstacles_is_unbounded(chain, spheres_scene):
    ev = evaluate_barrier(chain, np.zeros(7), spheres_scene)
    assert ev.value == np.inf and ev.active_pair is None


def test_min_consistency_and_locality(chain, spheres_scene, rng):
    scene = mixed_scene(spheres_scene)
    for q in random_q(rng, chain, 30):
        ev = evaluate_barrier(chain, q, scene)
        values = [p.value for p in ev.per_pair]
        assert ev.value == min(values)
        by_id = {p.pair: p for p in ev.per_pair}
        assert by_id[ev.active_pair].value == ev.value
        np.testing.assert_array_equal(by_id[ev.active_pair].gradient, ev.gradient)
        link = next(s.link_index for s in scene.spheres if s.id == ev.active_pair[0])
        np.testing.assert_array_equal(ev.gradient[min(link, 6) + 1:], 0.0)


def test_safety_semantics(chain, spheres_scene, rng):
    scene = mixed_scene(spheres_scene)
    seen = set()
    for q in random_q(rng, chain, 60):
        ev = evaluate_barrier(chain, q, scene)
        centers = scene.sphere_centers(chain, q)
        clear = all(
            pair_distance(c, 0.0, ob).distance >= s.radius + scene.margin
            for c, s in zip(centers, scene.spheres) for ob in scene.obstacles
        )
        assert (ev.value >= 0) == clear
        seen.add(clear)
    assert seen == {True, False}


joint_vectors = st.lists(st.floats(-2.5, 2.5), min_size=7, max_size=7).map(np.array)


@given(joint_vectors, st.floats(0.0, 0.5))
def test_halfspace_translation_covariance(q, delta):
    from cbfshield.collision import load_scene as _ls
    from cbfshield.config import data_path

    spheres = _ls(data_path("scenes", "panda_spheres.yaml"))
    a = evaluate_barrier(panda_chain(), q, spheres.with_obstacles([HalfSpace((0, 0.6, 0.8), 0.1, "w")]))
    b = evaluate_barrier(panda_chain(), q, spheres.with_obstacles([HalfSpace((0, 0.6, 0.8), 0.1 - delta, "w")]))
    np.testing.assert_allclose(b.pair_values, a.pair_values + delta, atol=1e-12)
    np.testing.assert_allclose(b.pair_gradients, a.pair_gradients, atol=1e-15)


@given(joint_vectors, st.floats(0.0, 0.2))
def test_margin_monotonicity(q, delta):
    from cbfshield.config import data_path

    scene = mixed_scene(load_scene(data_path("scenes", "panda_spheres.yaml")))
    a = evaluate_barrier(panda_chain(), q, scene)
    b = evaluate_barrier(panda_chain(), q, scene.with_margin(scene.margin + delta))
    assert b.value == pytest.approx(a.value - delta, abs=1e-12)


def test_stacked_state_matches_single(chain, spheres_scene, rng):
    from cbfshield.collision import barrier_batch

    scene = mixed_scene(spheres_scene)
    Q = random_q(rng, chain, 6)
    batch = barrier_batch(kinematic_state(chain, Q), scene)
    for q, ev in zip(Q, batch):
        single = evaluate_barrier(chain, q, scene)
        assert ev.value == single.value and ev.active_pair == single.active_pair
        np.testing.assert_allclose(ev.pair_gradients, single.pair_gradients, rtol=0, atol=1e-15)


def test_soft_min(chain, spheres_scene, rng):
    scene = mixed_scene(spheres_scene)
    q = random_q(rng, chain)
    hard = evaluate_barrier(chain, q, scene)
    prev = -np.inf
    for beta in (10.0, 100.0, 1000.0, 1e5):
        soft = evaluate_barrier(chain, q, scene, smoothing_beta=beta)
        assert soft.value <= hard.value + 1e-15
        assert soft.value >= prev
        prev = soft.value
    assert soft.value == pytest.approx(hard.value, abs=1e-3)
    g = central_difference(lambda x: [evaluate_barrier(chain, x, scene, smoothing_beta=50.0).value], q)[0]
    np.testing.assert_allclose(evaluate_barrier(chain, q, scene, smoothing_beta=50.0).gradient, g, atol=1e-5)


# -- files -----------------------------------------------------------------

def test_scene_roundtrip(spheres_scene, chain, rng):
    scene = mixed_scene(spheres_scene)
    again = load_scene(scene_to_doc(scene))
    q = random_q(rng, chain)
    np.testing.assert_array_equal(evaluate_barrier(chain, q, again).pair_values,
                                  evaluate_barrier(chain, q, scene).pair_values)


def test_scene_errors_carry_paths():
    base = {"spheres": [{"id": "s", "link": 1, "center": [0, 0, 0], "radius": 0.1}]}
    with pytest.raises(ConfigError) as exc:
        load_scene({**base, "obstacles": [{"id": "x", "kind": "torus"}]})
    assert exc.value.path == "obstacles[0].kind"
    with pytest.raises(ConfigError) as exc:
        load_scene({**base, "obstacles": [{"id": "h", "kind": "halfspace", "normal": [0, 0, 2], "offset": 0}]})
    assert exc.value.path == "obstacles[0]"
    with pytest.raises(ConfigError) as exc:
        load_scene({"obstacles": []})
    assert exc.value.path == "spheres"
