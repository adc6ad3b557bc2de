"""Export sensor extrinsics for a simulator and check one camera against a projection."""
import numpy as np

from rigplan import export_twin, load_bundled
from rigplan.coverage import project_point
from rigplan.model import dump_twin

rig = load_bundled()
twin = export_twin(rig)
print(f"{len(twin['sensors'])} sensors exported in {twin['frame']} frame as {twin['format']}")

cam = rig.sensor("cam_front_tele")
entry = next(e for e in twin["sensors"] if e["id"] == cam.id)
T = np.array(entry["extrinsic"]).reshape(4, 4)  # row-major sensor-to-vehicle
fx, fy, cx, cy = entry["intrinsic"]["camera_matrix"]
K = np.array([[fx, 0, cx], [0, fy, cy], [0, 0, 1]])

# A point 40 m ahead and 3 m left, pushed through the exported matrices by hand.
p_world = np.array([40.0, 3.0, 1.5, 1.0])
p_sensor = np.linalg.inv(T) @ p_world
# sensor frame is x forward, y left, z up; the pinhole uses (-y, -z, x)
uvw = K @ np.array([-p_sensor[1], -p_sensor[2], p_sensor[0]])
print("via exported matrices:", np.round(uvw[:2] / uvw[2], 3))
print("via project_point:    ", np.round(project_point(cam, p_world[:3]), 3))

with open("twin.json", "w") as fh:
    fh.write(dump_twin(twin))
print("wrote twin.json")
