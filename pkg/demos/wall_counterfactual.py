"""A policy keeps pushing the arm into a wall 5 cm behind the gripper.

We replay the same forty 1 cm actions twice, once straight through to the
joints and once through the safety filter, and print how close each run got
to the wall.
"""

from cbfshield import compare_runs, load_scenario, run_batch
from cbfshield.config import data_path

cfg = load_scenario(data_path("scenarios", "scenario3_backward_ood.yaml"))
print(f"scenario: {cfg.name} ({cfg.notes})")
print(f"{cfg.steps} actions, {cfg.substeps_per_action} filtered substeps each\n")

filtered, raw = run_batch([cfg, cfg.replace(filter_enabled=False)])
report = compare_runs(filtered, raw)

for label, log in (("without filter", raw), ("with filter", filtered)):
    s = log.summary
    print(f"{label:>15}: min clearance {s['min_barrier']:+.4f} m, "
          f"{s['violation_count']} violating substeps, intervention rate {s['intervention_rate']:.2f}")

# where did the filtered run start clamping the motion?
first = next(r for r in filtered.records if r.intervened)
print(f"\nthe filter first stepped in at action {first.step}, substep {first.substep}, "
      f"with {first.barrier:.4f} m of clearance left to {first.active_pair[1]!r}")
closest = min(filtered.records, key=lambda r: r.barrier)
print(f"closest approach under the filter: {closest.barrier * 1000:.3f} mm "
      f"(sphere {closest.active_pair[0]!r})")
print("\nsummary table:")
print(report.render_text(), end="")
