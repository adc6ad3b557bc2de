"""Vehicle network model: switch, bonded server uplink, VLANs and PTP hierarchy.

Traffic is many-to-one: every device flow runs device -> switch -> server.
The server bond is an 802.3ad aggregate; a flow is pinned to one member by
a deterministic hash (the device id's rank among all devices, modulo the
member count), so a single flow never exceeds one member's capacity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import RigSpec

ROLES = ("device", "switch", "server", "router", "converter")


class TopologyError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class Node:
    id: str
    role: str


@dataclass(frozen=True)
class Link:
    id: str
    a: str
    b: str
    capacity_bps: int
    poe: bool = False


@dataclass(frozen=True)
class Bond:
    id: str
    members: tuple[str, ...]
    owner: str


@dataclass(frozen=True)
class NetTopology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    bonds: tuple[Bond, ...]
    vlans: Mapping[int, tuple[str, ...]]
    trunk_links: tuple[str, ...]
    trunk_vlans: tuple[int, ...]
    grandmasters: tuple[str, ...]
    switch: str
    server: str
    router: str | None = None
    uplink_available: bool = True
    time_sensitive: frozenset[str] = field(default_factory=frozenset)
    poe_budget_w: float = 0.0
    poe_draw_w: float = 0.0

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def link(self, link_id: str) -> Link:
        for ln in self.links:
            if ln.id == link_id:
                return ln
        raise KeyError(link_id)

    @property
    def devices(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.role == "device")

    def vlan_of(self, node_id: str) -> int | None:
        for vid, members in self.vlans.items():
            if node_id in members:
                return vid
        return None

    def access_path(self, device: str) -> tuple[str, ...]:
        """Link ids from ``device`` up to the switch."""
        path = []
        here = device
        seen = {here}
        while here != self.switch:
            for ln in self.links:
                other = ln.b if ln.a == here else ln.a if ln.b == here else None
                if other is not None and other not in seen and self.node(other).role in ("converter", "switch"):
                    path.append(ln.id)
                    seen.add(other)
                    here = other
                    break
            else:
                raise TopologyError("NO_PATH", f"{device} is not attached to the switch")
        return tuple(path)

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for ln in self.links:
            adj[ln.a].append(ln.b)
            adj[ln.b].append(ln.a)
        return adj

    @property
    def bond_capacity_bps(self) -> int:
        return sum(self.link(m).capacity_bps for b in self.bonds for m in b.members)


def build_topology(rig: RigSpec) -> NetTopology:
    """Topology implied by the rig's network section and sensor attachments.

    Raises:
        TopologyError: ``CONFIG_PORTS_EXCEEDED`` when more devices than
            switch ports are attached.
    """
    net = rig.network
    devices = [s for s in rig.sensors if s.networked]
    used = len(devices) + (1 if net.router is not None else 0)
    if used > net.switch_ports:
        raise TopologyError("CONFIG_PORTS_EXCEEDED", f"{used} attachments on a {net.switch_ports}-port switch")
    nodes = [Node(net.switch_id, "switch"), Node(net.server_id, "server")]
    links: list[Link] = []
    vlans: dict[int, list[str]] = {}
    for s in devices:
        nodes.append(Node(s.id, "device"))
        vid = net.vlans[s.modality]
        vlans.setdefault(vid, []).append(s.id)
        if s.automotive_ethernet:
            conv = f"{s.id}.mc"
            nodes.append(Node(conv, "converter"))
            vlans[vid].append(conv)
            links.append(Link(f"{s.id}--{conv}", s.id, conv, net.device_link_bps))
            links.append(Link(f"{conv}--{net.switch_id}", conv, net.switch_id, net.device_link_bps))
        else:
            links.append(Link(f"{s.id}--{net.switch_id}", s.id, net.switch_id, net.device_link_bps, poe=s.poe_w > 0))
    router = None
    if net.router is not None:
        router = net.router.id
        nodes.append(Node(router, "router"))
        vlans.setdefault(net.router.vlan, []).append(router)
        links.append(Link(f"{router}--{net.switch_id}", router, net.switch_id, net.device_link_bps))
    members = []
    for i in range(net.bond_members):
        lid = f"bond0.{i}"
        links.append(Link(lid, net.switch_id, net.server_id, net.member_capacity_bps))
        members.append(lid)
    all_vlans = tuple(sorted(vlans))
    trunk = all_vlans if net.trunk_vlans is None else tuple(sorted(net.trunk_vlans))
    return NetTopology(
        nodes=tuple(nodes),
        links=tuple(links),
        bonds=(Bond("bond0", tuple(members), net.server_id),) if members else (),
        vlans={vid: tuple(ids) for vid, ids in sorted(vlans.items())},
        trunk_links=tuple(members),
        trunk_vlans=trunk,
        grandmasters=net.grandmaster,
        switch=net.switch_id,
        server=net.server_id,
        router=router,
        uplink_available=net.router.available if net.router is not None else False,
        time_sensitive=frozenset(s.id for s in devices if s.time_sensitive),
        poe_budget_w=net.poe_budget_w,
        poe_draw_w=sum(s.poe_w for s in devices),
    )


def default_demands(rig: RigSpec) -> dict[str, int]:
    """Configured per-device demand; unset demands saturate the access link."""
    return {
        s.id: s.net_demand_bps if s.net_demand_bps is not None else rig.network.device_link_bps
        for s in rig.sensors
        if s.networked
    }


@dataclass(frozen=True)
class Flow:
    device: str
    demand_bps: int
    path: tuple[str, ...]
    member: str | None


@dataclass(frozen=True)
class FlowAssignment:
    flows: tuple[Flow, ...]
    link_loads: Mapping[str, int]

    @property
    def total_bps(self) -> int:
        return sum(f.demand_bps for f in self.flows)


def member_for(topology: NetTopology, device: str) -> str | None:
    """Bond member carrying ``device``'s flow: id rank among devices, mod member count."""
    if not topology.bonds:
        return None
    members = topology.bonds[0].members
    rank = sorted(topology.devices).index(device)
    return members[rank % len(members)]


def assign_flows(topology: NetTopology, demands: Mapping[str, int]) -> FlowAssignment:
    """Route each demand device -> switch -> server and accumulate link loads.

    Demands are processed in sorted device order, so the result does not
    depend on the mapping's iteration order.
    """
    devices = set(topology.devices)
    loads = {ln.id: 0 for ln in topology.links}
    flows = []
    for dev in sorted(demands):
        if dev not in devices:
            raise KeyError(f"unknown device {dev!r}")
        demand = demands[dev]
        member = member_for(topology, dev)
        path = topology.access_path(dev) + ((member,) if member else ())
        for lid in path:
            loads[lid] += demand
        flows.append(Flow(dev, demand, path, member))
    return FlowAssignment(tuple(flows), loads)


@dataclass(frozen=True)
class CapacityReport:
    utilization: Mapping[str, float]
    overloaded: tuple[str, ...]
    bond_utilization: Mapping[str, float]
    bond_load_bps: Mapping[str, int]
    poe_ok: bool

    @property
    def ok(self) -> bool:
        return not self.overloaded and self.poe_ok


def check_capacity(assignment: FlowAssignment, topology: NetTopology) -> CapacityReport:
    util = {}
    for ln in topology.links:
        load = assignment.link_loads.get(ln.id, 0)
        util[ln.id] = load / ln.capacity_bps if ln.capacity_bps else (float("inf") if load else 0.0)
    overloaded = tuple(lid for lid, u in util.items() if u > 1.0)
    bond_util = {}
    bond_load = {}
    for bond in topology.bonds:
        load = sum(assignment.link_loads.get(m, 0) for m in bond.members)
        cap = sum(topology.link(m).capacity_bps for m in bond.members)
        bond_load[bond.id] = load
        bond_util[bond.id] = load / cap if cap else 0.0
    return CapacityReport(util, overloaded, bond_util, bond_load, topology.poe_draw_w <= topology.poe_budget_w)


def node_balance(assignment: FlowAssignment, topology: NetTopology) -> dict[str, int]:
    """Inflow minus outflow per node, following each flow's path direction."""
    balance = {n.id: 0 for n in topology.nodes}
    for flow in assignment.flows:
        here = flow.device
        for lid in flow.path:
            ln = topology.link(lid)
            there = ln.b if ln.a == here else ln.a
            balance[here] -= flow.demand_bps
            balance[there] += flow.demand_bps
            here = there
    return balance


def _trunk_nodes(topology: NetTopology) -> set[str]:
    return {topology.server, topology.switch}


def vlan_reachable(topology: NetTopology, a: str, b: str) -> bool:
    """Whether ``a`` and ``b`` share a layer-2 network.

    Access devices only see their own VLAN. The server and the switch sit on
    tagged trunks and see every VLAN the trunk carries.
    """
    topology.node(a)
    topology.node(b)
    if a == b:
        return True
    trunks = _trunk_nodes(topology)
    va, vb = topology.vlan_of(a), topology.vlan_of(b)
    if a in trunks and b in trunks:
        return True
    if a in trunks:
        return vb in topology.trunk_vlans
    if b in trunks:
        return va in topology.trunk_vlans
    return va is not None and va == vb


@dataclass(frozen=True)
class PtpFinding:
    code: str
    node: str
    message: str


@dataclass(frozen=True)
class PtpReport:
    findings: tuple[PtpFinding, ...]
    grandmaster: str | None
    depths: Mapping[str, int]

    @property
    def ok(self) -> bool:
        return not self.findings


def _hops(topology: NetTopology, start: str) -> dict[str, int]:
    """BFS hop counts from ``start``; media converters are layer-1 and add no hop."""
    roles = {n.id: n.role for n in topology.nodes}
    adj = topology.adjacency()
    dist = {start: 0}
    queue = deque([start])
    while queue:
        here = queue.popleft()
        for nxt in adj[here]:
            if nxt in dist:
                continue
            dist[nxt] = dist[here] + (0 if roles[nxt] == "converter" else 1)
            if roles[nxt] == "converter":
                queue.appendleft(nxt)
            else:
                queue.append(nxt)
    return dist


def validate_ptp(topology: NetTopology) -> PtpReport:
    """Structural check of the PTP tree: grandmaster -> server -> time-sensitive devices."""
    findings: list[PtpFinding] = []
    gms = topology.grandmasters
    ids = {n.id for n in topology.nodes}
    gm = None
    if not gms:
        findings.append(PtpFinding("PTP_NO_GM", "", "no grandmaster clock configured"))
    elif len(gms) > 1:
        findings.append(PtpFinding("PTP_MULTIPLE_GM", ",".join(gms), f"{len(gms)} grandmasters configured"))
    else:
        gm = gms[0]
        if gm not in ids:
            findings.append(PtpFinding("PTP_GM_UNKNOWN", gm, "grandmaster is not a node of the topology"))
            gm = None
    hops = _hops(topology, topology.server)
    if gm is not None and (gm not in hops or not vlan_reachable(topology, topology.server, gm)):
        findings.append(PtpFinding("PTP_GM_UNREACHABLE", gm, "server cannot reach the grandmaster"))
    depths = {}
    for dev in sorted(topology.time_sensitive):
        if dev not in hops or not vlan_reachable(topology, topology.server, dev):
            findings.append(PtpFinding("PTP_UNREACHABLE", dev, "time-sensitive device is not reachable from the server"))
            continue
        depths[dev] = hops[dev]
    return PtpReport(tuple(findings), gm, depths)


@dataclass(frozen=True)
class Headroom:
    disk: float
    uplink: float

    @property
    def ok(self) -> bool:
        return self.disk >= 1.0 and self.uplink >= 1.0


def recording_headroom(total_demand: float, disk_bw: float, uplink_capacity: float) -> Headroom:
    """Disk and uplink capacity as multiples of the total sensor demand."""
    if total_demand <= 0 or disk_bw <= 0 or uplink_capacity <= 0:
        raise ValueError("all bandwidths must be positive")
    return Headroom(disk_bw / total_demand, uplink_capacity / total_demand)


def vlan_matrix(topology: NetTopology, nodes: Iterable[str] | None = None) -> dict[tuple[str, str], bool]:
    ids = list(nodes) if nodes is not None else [n.id for n in topology.nodes if n.role != "converter"]
    return {(a, b): vlan_reachable(topology, a, b) for a in ids for b in ids}
