"""Where the bundled rig's 20 Gbit/s goes, and how the bond hash can bite."""
from rigplan import load_bundled
from rigplan.model import NetConfig, RigSpec, Sensor, VehicleBody
from rigplan.netplan import (
    assign_flows, build_topology, check_capacity, default_demands,
    recording_headroom, validate_ptp, vlan_reachable,
)

rig = load_bundled()
topo = build_topology(rig)
flows = assign_flows(topo, default_demands(rig))
cap = check_capacity(flows, topo)

print(f"devices {len(topo.devices)}, bond capacity {topo.bond_capacity_bps / 1e9:.0f} Gbit/s")
print(f"aggregate demand {flows.total_bps / 1e9:.1f} Gbit/s, bond utilization {cap.bond_utilization['bond0']:.2f}")
for member in topo.bonds[0].members:
    print(f"  {member}: {flows.link_loads[member] / 1e9:.1f} Gbit/s")

h = recording_headroom(flows.total_bps, rig.network.disk_write_bps, topo.bond_capacity_bps)
print(f"disk headroom {h.disk:.2f}, uplink headroom {h.uplink:.2f}")

ptp = validate_ptp(topo)
print(f"PTP grandmaster {ptp.grandmaster}, deepest device {max(ptp.depths.values())} hops from the server")
print("camera sees lidar?", vlan_reachable(topo, "cam_front_wide", "lidar_mid_front_left"))
print("camera sees server?", vlan_reachable(topo, "cam_front_wide", topo.server))

# A flow is pinned to one bond member by the rank of its device id.
# Eleven 1 Gbit/s devices whose ranks share a residue land on the same
# 10 Gbit/s member even though the bond as a whole is nearly idle.
sensors = tuple(Sensor(f"dev{i:02d}", "camera", (0.0, 0.0, 1.0), port=i + 1) for i in range(44))
crowded = build_topology(RigSpec("crowded", VehicleBody(()), sensors, NetConfig(vlans={"camera": 20})))
heavy = {d: 1_000_000_000 for i, d in enumerate(sorted(crowded.devices)) if i % 4 == 0}
report = check_capacity(assign_flows(crowded, heavy), crowded)
print(f"\nadversarial ids: bond at {report.bond_utilization['bond0']:.3f}, "
      f"bond0.0 at {report.utilization['bond0.0']:.2f}, overloaded {report.overloaded}")
