"""One filter call, taken apart.

The flange starts 5 cm in front of a wall, which leaves the 4 cm collision
sphere around it 1 cm of clearance, and the policy asks for a 1 cm move
toward the wall. The script shows the unconstrained damped least-squares answer,
the barrier rows the filter adds, and what comes out.
"""

import numpy as np

from cbfshield import ActionCommand, FilterParams, SafetyFilter, evaluate_barrier, geometric_jacobian, load_scene, panda_chain
from cbfshield.config import data_path
from cbfshield.fixtures import Q_SCENARIO3
from cbfshield.safety_filter import damped_least_squares

np.set_printoptions(precision=4, suppress=True)
chain = panda_chain()
scene = load_scene(data_path("scenes", "scenario3_wall.yaml"))
params = FilterParams()
q = np.array(Q_SCENARIO3)


def report(q, u):
    J = geometric_jacobian(chain, q)
    dls = damped_least_squares(J, u, params.lam)
    bar = evaluate_barrier(chain, q, scene)
    near = bar.pair_values < params.activation_distance
    print(f"  barrier h(q) = {bar.value:.4f} m, nearest pair {bar.active_pair}")
    print(f"  {int(near.sum())} sphere/obstacle pairs are within {params.activation_distance} m and become constraints")
    print(f"  damped least squares step: {dls}")
    res = SafetyFilter(chain, scene, params)(q, ActionCommand(u[:3], u[3:], gripper=1))
    print(f"  filtered step:             {res.dq_safe}")
    print(f"  intervened: {res.intervened}, gripper out: {res.gripper}, h after: {res.barrier_after:.4f} m")
    return res


print("step 1: a 1 cm push toward the wall from the start pose")
u = np.array([0.01, 0, 0, 0, 0, 0])
res = report(q, u)

print("\nstep 2: keep pushing for a while and watch the clearance settle")
for k in range(40):
    res = SafetyFilter(chain, scene, params)(q, ActionCommand(u[:3] / 10, u[3:] / 10))
    q = q + res.dq_safe
    if k % 10 == 9:
        print(f"  after {k + 1:2d} substeps: h = {res.barrier_after * 1000:7.3f} mm, intervened {res.intervened}")

print("\nstep 3: the same request once the arm is already close")
report(q, u)
print("\nthe CBF rows only allow h to shrink by a fraction gamma per step, so the wall is approached but never crossed")
