"""The shipped scenario fixtures.

Three tabletop scenes for the Panda arm:

* ``scenario1``: a table plane plus an upright cylinder standing in front
  of a bottle. The policy approaches the bottle along a straight line
  that passes over the top of the cylinder.
* ``scenario2``: an open-top box made of five thin slabs resting on the
  table. The policy digs toward a point below the rim, starting from
  beside the box, so the straight approach clips the near wall.
* ``scenario3``: a wall plane 5 cm behind the start flange position
  along +x. The policy drifts backward into it with noise on top.

Obstacle sizes are picked to look like a desk setup; they are not
measured from any real object. The scripted 20 cm forward and downward
traces run in free space.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np

from .collision import Box, CollisionScene, HalfSpace, VerticalCylinder, load_scene, scene_to_doc
from .config import data_path, dump_document
from .kinematics import FLANGE, kinematic_state, panda_chain
from .safety_filter import ActionCommand, FilterParams
from .sim import ConstantDelta, NoisyHallucination, ScenarioConfig, Scripted, WaypointApproach, save_scenario

CHAIN_REF = "pkg:chains/panda.yaml"
SPHERES_REF = "pkg:scenes/panda_spheres.yaml"

# start poses, flange pointing down
Q_SCENARIO1 = (0.0794, 0.3703, -0.5351, -1.9893, 0.2492, 2.2961, 0.1928)  # flange near (0.55, -0.25, 0.30)
Q_SCENARIO2 = (-0.0324, 0.1932, 0.5611, -2.0762, -0.1302, 2.2362, 1.3864)  # flange near (0.50, 0.28, 0.35)
Q_SCENARIO3 = (0.0, -0.1559, 0.0, -2.1983, 0.0, 2.0424, 0.7854)  # flange near (0.50, 0.00, 0.45)

WALL_GAP = 0.05
STEP = 0.01
TRACE_ACTIONS = 20
BACKWARD_ACTIONS = 40

TABLE = HalfSpace((0.0, 0.0, 1.0), 0.0, "table")


def _spheres():
    return load_scene(data_path("scenes", "panda_spheres.yaml")).spheres


def flange_start(q) -> np.ndarray:
    return kinematic_state(panda_chain(), np.asarray(q, dtype=float)).positions[FLANGE]


def scene_scenario1() -> CollisionScene:
    heater = VerticalCylinder((0.55, -0.04, 0.12), 0.05, 0.12, "heater")
    return CollisionScene(_spheres(), (TABLE, heater), name="scenario1_tabletop",
                          notes="table plane plus a 24 cm tall, 5 cm radius upright cylinder")


def scene_scenario2() -> CollisionScene:
    # interior x in [0.40, 0.70], y in [-0.15, 0.15]; rim at z = 0.15; slabs 2 cm thick
    t, h = 0.01, 0.075
    slabs = (
        Box((0.55, 0.0, 0.01), (0.16, 0.16, t), "box_floor"),
        Box((0.39, 0.0, h), (t, 0.16, h), "box_wall_back"),
        Box((0.71, 0.0, h), (t, 0.16, h), "box_wall_front"),
        Box((0.55, -0.16, h), (0.16, t, h), "box_wall_right"),
        Box((0.55, 0.16, h), (0.16, t, h), "box_wall_left"),
    )
    return CollisionScene(_spheres(), (TABLE,) + slabs, name="scenario2_litter_box",
                          notes="open-top box 30 x 30 x 15 cm inside, five 2 cm slabs, on the table plane")


def scene_scenario3() -> CollisionScene:
    x_wall = float(flange_start(Q_SCENARIO3)[0]) + WALL_GAP
    wall = HalfSpace((-1.0, 0.0, 0.0), -x_wall, "wall")
    return CollisionScene(_spheres(), (TABLE, wall), name="scenario3_wall",
                          notes="wall plane 5 cm behind the start flange position along +x")


def scene_free() -> CollisionScene:
    return CollisionScene(_spheres(), (), name="free_space", notes="no obstacles")


SCENES = {
    "scenario1_tabletop": scene_scenario1,
    "scenario2_litter_box": scene_scenario2,
    "scenario3_wall": scene_scenario3,
    "free_space": scene_free,
}


def _scene_ref(name: str, prefix: str) -> str:
    return f"{prefix}{name}.yaml"


def make_scenario_fixtures(scene_prefix: str = "pkg:scenes/", chain_ref: str = CHAIN_REF) -> list[ScenarioConfig]:
    """Scenario I, II and III, filter enabled, seed 0."""
    s1 = ScenarioConfig(
        chain_path=chain_ref,
        scene_path=_scene_ref("scenario1_tabletop", scene_prefix),
        initial_q=Q_SCENARIO1,
        policy=WaypointApproach((0.55, 0.15, 0.18), gain=0.2, max_step=0.02),
        steps=25,
        name="scenario1_tabletop",
        notes="approach a bottle beside an upright heated cylinder",
    )
    s2 = ScenarioConfig(
        chain_path=chain_ref,
        scene_path=_scene_ref("scenario2_litter_box", scene_prefix),
        initial_q=Q_SCENARIO2,
        policy=WaypointApproach((0.55, 0.10, 0.05), gain=0.2, max_step=0.02),
        steps=25,
        name="scenario2_litter_box",
        notes="dig toward a point below the rim from beside the box",
    )
    s3 = ScenarioConfig(
        chain_path=chain_ref,
        scene_path=_scene_ref("scenario3_wall", scene_prefix),
        initial_q=Q_SCENARIO3,
        policy=NoisyHallucination(ConstantDelta((0.0, 0.0, 0.0)), noise_std=(0.003, 0.003, 0.003), ood_bias=(STEP, 0.0, 0.0)),
        steps=BACKWARD_ACTIONS,
        name="scenario3_hallucination",
        notes="hallucinated backward drift toward the wall, with noise",
    )
    return [s1, s2, s3]


def scenario3_traces(scene_prefix: str = "pkg:scenes/", chain_ref: str = CHAIN_REF) -> dict[str, ScenarioConfig]:
    """Scripted 20 cm forward (-x) and downward traces in free space, plus the plain backward run into the wall."""
    fwd = ActionCommand((-STEP, 0.0, 0.0))
    down = ActionCommand((0.0, 0.0, -STEP))
    common = dict(chain_path=chain_ref, initial_q=Q_SCENARIO3)
    return {
        "forward": ScenarioConfig(scene_path=_scene_ref("free_space", scene_prefix), policy=Scripted((fwd,) * TRACE_ACTIONS),
                                  steps=TRACE_ACTIONS, name="scenario3_forward", notes="20 actions of 1 cm toward the base", **common),
        "downward": ScenarioConfig(scene_path=_scene_ref("free_space", scene_prefix), policy=Scripted((down,) * TRACE_ACTIONS),
                                   steps=TRACE_ACTIONS, name="scenario3_downward", notes="20 actions of 1 cm down", **common),
        "backward_ood": ScenarioConfig(scene_path=_scene_ref("scenario3_wall", scene_prefix), policy=ConstantDelta((STEP, 0.0, 0.0)),
                                       steps=BACKWARD_ACTIONS, name="scenario3_backward_ood", notes="40 actions of 1 cm into the wall", **common),
    }


HALLUCINATION_STD = (0.003, 0.003, 0.003)


def hallucination_variant(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    """``config`` with its policy wrapped in (or re-seeded as) a noisy hallucination."""
    policy = config.policy
    if not isinstance(policy, NoisyHallucination):
        policy = NoisyHallucination(policy, HALLUCINATION_STD)
    return config.replace(policy=policy, seed=seed, name=f"{config.name}_seed{seed}")


def with_step_cap(config: ScenarioConfig, step_cap: float) -> ScenarioConfig:
    d = config.filter.to_doc()
    d["step_cap"] = step_cap
    return config.replace(filter=FilterParams.from_doc(d))


def emit_fixtures(out_dir: str | Path) -> list[Path]:
    """Write a self-contained copy of the chain, scenes and scenario files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in ("chains/panda.yaml", "scenes/panda_spheres.yaml"):
        dst = out / Path(name).name
        shutil.copyfile(data_path(*name.split("/")), dst)
        written.append(dst)
    for name, build in SCENES.items():
        dst = out / f"{name}.yaml"
        dst.write_text(dump_document(scene_to_doc(build(), spheres_from="panda_spheres.yaml")))
        written.append(dst)
    configs = make_scenario_fixtures(scene_prefix="", chain_ref="panda.yaml") + list(scenario3_traces(scene_prefix="", chain_ref="panda.yaml").values())
    for cfg in configs:
        dst = out / f"{cfg.name}.scenario.yaml"
        save_scenario(cfg, dst)
        written.append(dst)
    return written


def write_package_data() -> None:
    """Regenerate the shipped scene and scenario files (maintainer helper)."""
    scenes_dir = data_path("scenes")
    for name, build in SCENES.items():
        (scenes_dir / f"{name}.yaml").write_text(dump_document(scene_to_doc(build(), spheres_from="panda_spheres.yaml")))
    scen_dir = data_path("scenarios")
    configs = make_scenario_fixtures(scene_prefix="../scenes/", chain_ref="../chains/panda.yaml")
    configs += list(scenario3_traces(scene_prefix="../scenes/", chain_ref="../chains/panda.yaml").values())
    for cfg in configs:
        save_scenario(cfg, scen_dir / f"{cfg.name}.yaml")
