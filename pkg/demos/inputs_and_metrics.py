"""Input formatting and attention metrics.

A synthetic depth frame is turned into a Turbo pseudo-color image, then three
made-up saliency maps are scored: one uniform, one focused on a target
region, one focused elsewhere.
"""

import numpy as np

from cbfshield import attention_mass, depth_to_turbo, normalized_entropy, pearson_alignment, zero_mask_image

h, w = 48, 64
yy, xx = np.mgrid[0:h, 0:w]
depth = 0.6 + 0.08 * xx  # a ramp from 0.6 m to about 5.6 m
depth[10:20, 10:20] = np.nan  # a hole in the sensor data
img = depth_to_turbo(depth)
print(f"depth range {np.nanmin(depth):.2f}..{np.nanmax(depth):.2f} m -> RGB image {img.shape}, {img.dtype}")
print(f"  nearest column color {img[30, 0].tolist()}, farthest {img[30, -1].tolist()}")
print(f"  the invalid hole renders as {img[15, 15].tolist()} (same as beyond-range pixels: {img[30, -1].tolist()})")
print(f"  a zero-mask ablation input is all zeros: {int(zero_mask_image(224, 224).sum()) == 0}\n")

target = np.zeros((h, w), bool)
target[28:40, 40:56] = True
reference = np.exp(-((yy - 34) ** 2 + (xx - 48) ** 2) / 40.0)

maps = {
    "uniform": np.ones((h, w)),
    "on target": reference + 0.01,
    "off target": np.exp(-((yy - 8) ** 2 + (xx - 8) ** 2) / 40.0),
}
print(f"{'map':>12}  entropy  pearson  mass-in-target")
for name, m in maps.items():
    r = pearson_alignment(m, reference) if np.ptp(m) > 0 else float("nan")
    print(f"{name:>12}  {normalized_entropy(m):7.3f}  {r:7.3f}  {attention_mass(m, target):14.3f}")
print("\na focused map has low entropy; alignment and mass tell whether it focuses on the right place")
