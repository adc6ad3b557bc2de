"""Ground-level coverage of the bundled rig, one modality group at a time."""
import math

import numpy as np

from rigplan import load_bundled
from rigplan.coverage import azimuthal_coverage, blind_spot_area, coverage_grid, grid_pgm

rig = load_bundled()
print(f"{rig.name}: {len(rig.sensors)} sensors, {len(rig.vehicle.occluders)} body boxes\n")

# Sweep a 10 m circle at bumper height. A gap is an azimuth range no sensor sees.
for group in ("lidar_mid_range", "lidar_long_range", "lidar_4d", "camera", "radar"):
    az = azimuthal_coverage(rig, group, radius=10.0, query_height=1.0, step=math.radians(0.5))
    gaps = ", ".join(f"{math.degrees(a):.1f}..{math.degrees(b):.1f}" for a, b in az.gaps) or "none"
    print(f"{group:<18} fraction {az.fraction:.3f}  gaps: {gaps}")

# The long-range units sit high and look nearly flat, so they see the
# ground only beyond a ring. Compare the k-coverage at the ground and at 1 m.
print()
for h in (0.0, 1.0):
    grid = coverage_grid(rig, "lidar_long_range", query_height=h, extent=15.0, cell_size=0.25)
    stats = blind_spot_area(grid, 10.0)
    print(f"long range at h={h:.0f} m: blind {stats.blind_area:7.2f} m2, covered {stats.covered_area:7.2f} m2 "
          f"inside r=10 m (vehicle footprint {stats.interior_area:.2f} m2)")

# Overlap: how many cameras see each cell near the car.
grid = coverage_grid(rig, "camera", query_height=1.0, extent=12.0, cell_size=0.1)
counts = np.bincount(grid.k[~grid.interior].ravel())
print("\ncameras per cell:", {k: int(n) for k, n in enumerate(counts)})

with open("camera_coverage.pgm", "wb") as fh:
    fh.write(grid_pgm(grid))
print("wrote camera_coverage.pgm (brighter = more cameras, +y at the top)")
