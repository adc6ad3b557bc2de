"""Rig description schema: parsing, validation, serialization and twin export.

A rig document is YAML. Angles are written in degrees and kept in degrees on
the dataclasses (so documents round-trip exactly); the radian values used by
the geometry code are exposed as properties.

Vehicle frame: origin at the ground projection of the rear-axle center,
x forward, y left, z up. Sensor orientation is yaw about z, then pitch about
y, then roll about x, all right-handed (positive pitch tilts the boresight
down).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

from .powerplan import DEFAULT_EFFICIENCY, RAILS, Battery, Boosters, Load, PowerSystem

MODALITIES = (
    "lidar_mid_range",
    "lidar_long_range",
    "lidar_4d",
    "camera",
    "radar",
    "gnss",
    "v2x",
)
# v2x units are network-only and carry no field of view
FRUSTUM_MODALITIES = tuple(m for m in MODALITIES if m != "v2x")
LIDAR_MODALITIES = ("lidar_mid_range", "lidar_long_range", "lidar_4d")

BUNDLED_RIG = "cocar-nextgen"
TWIN_FORMAT = "rigplan-twin/1"
SELF_OCCLUSION_TOL = 0.01  # m


class RigParseError(ValueError):
    """Raised for malformed rig documents.

    ``path`` is a dotted location inside the document (``sensors[3].max_range_m``),
    ``line``/``column`` are 1-based when known.
    """

    def __init__(self, message: str, path: str = "", line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if path:
            where.append(path)
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


class TwinExportError(ValueError):
    pass


# -- schema ------------------------------------------------------------------


@dataclass(frozen=True)
class OrientedBox:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    yaw_deg: float = 0.0
    name: str = ""

    @property
    def yaw(self) -> float:
        return math.radians(self.yaw_deg)

    def contains(self, point: Iterable[float], tol: float = 0.0) -> bool:
        """Closed containment test, with the box inflated by ``tol`` on every side."""
        px, py, pz = point
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx, dy, dz = px - self.center[0], py - self.center[1], pz - self.center[2]
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        hx, hy, hz = self.half_extents
        return abs(lx) <= hx + tol and abs(ly) <= hy + tol and abs(dz) <= hz + tol


@dataclass(frozen=True)
class VehicleBody:
    occluders: tuple[OrientedBox, ...]
    provenance: str | None = None


@dataclass(frozen=True)
class Sensor:
    id: str
    modality: str
    position_m: tuple[float, float, float]
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0
    azimuth_fov_deg: float | None = None
    elevation_fov_deg: float | None = None
    max_range_m: float | None = None
    resolution: int | tuple[int, int] | None = None
    frame_rate_hz: float | None = None
    net_demand_bps: int | None = None
    port: int | None = None
    automotive_ethernet: bool = False
    poe_w: float = 0.0
    time_sensitive: bool = True
    provenance: str | None = None

    @property
    def yaw(self) -> float:
        return math.radians(self.yaw_deg)

    @property
    def pitch(self) -> float:
        return math.radians(self.pitch_deg)

    @property
    def roll(self) -> float:
        return math.radians(self.roll_deg)

    @property
    def azimuth_fov(self) -> float:
        return math.radians(self.azimuth_fov_deg)

    @property
    def elevation_fov(self) -> float:
        return math.radians(self.elevation_fov_deg)

    @property
    def has_frustum(self) -> bool:
        return self.azimuth_fov_deg is not None

    @property
    def spinning(self) -> bool:
        return self.has_frustum and self.azimuth_fov_deg >= 360.0

    @property
    def networked(self) -> bool:
        return self.port is not None

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.position_m, dtype=float)

    @property
    def rotation(self) -> np.ndarray:
        """Sensor-to-vehicle rotation matrix."""
        return rotation_matrix(self.yaw, self.pitch, self.roll)


def rotation_matrix(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rz(yaw) @ Ry(pitch) @ Rx(roll), written out entry by entry."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


@dataclass(frozen=True)
class RouterConfig:
    id: str = "router"
    port: int | None = None
    vlan: int = 100
    uplink: str = "5g"
    available: bool = True


@dataclass(frozen=True)
class NetConfig:
    switch_id: str = "switch"
    switch_ports: int = 52
    poe_budget_w: float = 740.0
    device_link_bps: int = 1_000_000_000
    server_id: str = "server"
    bond_members: int = 4
    member_capacity_bps: int = 10_000_000_000
    disk_write_bps: int | None = None
    router: RouterConfig | None = None
    vlans: Mapping[str, int] = field(default_factory=dict)
    trunk_vlans: tuple[int, ...] | None = None  # None: the server bond carries every VLAN
    grandmaster: tuple[str, ...] = ()


@dataclass(frozen=True)
class RigSpec:
    name: str
    vehicle: VehicleBody
    sensors: tuple[Sensor, ...] = ()
    network: NetConfig = NetConfig()
    power: PowerSystem | None = None

    def sensor(self, sensor_id: str) -> Sensor:
        for s in self.sensors:
            if s.id == sensor_id:
                return s
        raise KeyError(sensor_id)

    def group(self, modalities: str | Iterable[str]) -> tuple[Sensor, ...]:
        """Sensors with a frustum whose modality is in ``modalities``."""
        wanted = resolve_group(modalities)
        return tuple(s for s in self.sensors if s.modality in wanted and s.has_frustum)


GROUP_ALIASES = {
    "lidar": LIDAR_MODALITIES,
    "all": FRUSTUM_MODALITIES,
}


def resolve_group(modalities: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(modalities, str):
        modalities = [m.strip() for m in modalities.split(",") if m.strip()]
    out: list[str] = []
    for m in modalities:
        expanded = GROUP_ALIASES.get(m, (m,))
        for e in expanded:
            if e not in MODALITIES:
                raise ValueError(f"unknown modality group {m!r}")
            if e not in out:
                out.append(e)
    return tuple(out)


# -- YAML loading with positions -----------------------------------------------


class _Doc(dict):
    """Mapping that remembers the source line of each key."""

    lines: dict[str, tuple[int, int]]


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader: _Loader, node: yaml.MappingNode) -> _Doc:
    loader.flatten_mapping(node)
    doc = _Doc()
    doc.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in doc:
            mark = key_node.start_mark
            raise RigParseError(f"duplicate key {key!r}", line=mark.line + 1, column=mark.column + 1)
        doc[key] = loader.construct_object(value_node, deep=True)
        doc.lines[key] = (key_node.start_mark.line + 1, key_node.start_mark.column + 1)
    return doc


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


class _Reader:
    """Walks one mapping of the document, checking keys and types."""

    def __init__(self, data: Any, path: str, allowed: Iterable[str], where: tuple[int, int] | None = None):
        self.path = path
        if not isinstance(data, dict):
            line, col = where or (None, None)
            raise RigParseError("expected a mapping", path, line, col)
        self.data = data
        self.lines = getattr(data, "lines", {})
        allowed = set(allowed)
        for key in data:
            if key not in allowed:
                line, col = self.lines.get(key, (None, None))
                raise RigParseError(f"unknown field {key!r}", self._sub(key), line, col)

    def _sub(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else str(key)

    def _fail(self, key: str, message: str) -> RigParseError:
        line, col = self.lines.get(key, (None, None))
        return RigParseError(message, self._sub(key), line, col)

    def has(self, key: str) -> bool:
        return key in self.data and self.data[key] is not None

    def raw(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def where(self, key: str) -> tuple[int, int] | None:
        return self.lines.get(key)

    def text(self, key: str, default: str | None = None, required: bool = False) -> str | None:
        if not self.has(key):
            if required:
                raise self._fail(key, f"missing required field {key!r}")
            return default
        value = self.data[key]
        if not isinstance(value, str):
            raise self._fail(key, "expected text")
        return value

    def number(self, key: str, default: float | None = None, required: bool = False,
               minimum: float | None = None, integer: bool = False) -> Any:
        if not self.has(key):
            if required:
                raise self._fail(key, f"missing required field {key!r}")
            return default
        value = _as_number(self.data[key])
        if value is None:
            raise self._fail(key, "expected a number")
        if minimum is not None and value < minimum:
            raise self._fail(key, f"unit violation: {value!r} is below {minimum!r}")
        if integer:
            if value != int(value):
                raise self._fail(key, "expected an integer")
            return int(value)
        return float(value)

    def flag(self, key: str, default: bool) -> bool:
        if not self.has(key):
            return default
        value = self.data[key]
        if not isinstance(value, bool):
            raise self._fail(key, "expected true or false")
        return value

    def vector(self, key: str, size: int, required: bool = True, positive: bool = False) -> tuple[float, ...] | None:
        if not self.has(key):
            if required:
                raise self._fail(key, f"missing required field {key!r}")
            return None
        value = self.data[key]
        if not isinstance(value, list) or len(value) != size:
            raise self._fail(key, f"expected a list of {size} numbers")
        out = []
        for v in value:
            n = _as_number(v)
            if n is None:
                raise self._fail(key, f"expected a list of {size} numbers")
            if positive and n < 0:
                raise self._fail(key, f"unit violation: {n!r} is negative")
            out.append(float(n))
        return tuple(out)

    def items(self, key: str) -> list[Any]:
        if not self.has(key):
            return []
        value = self.data[key]
        if not isinstance(value, list):
            raise self._fail(key, "expected a list")
        return value


def _as_number(value: Any) -> float | int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        # YAML 1.1 reads 33.4e9 as text
        try:
            f = float(value)
        except ValueError:
            return None
        return int(f) if f.is_integer() and "." not in value and "e" not in value.lower() else f
    return None


SENSOR_FIELDS = (
    "id", "modality", "position_m", "yaw_deg", "pitch_deg", "roll_deg",
    "azimuth_fov_deg", "elevation_fov_deg", "max_range_m", "resolution",
    "frame_rate_hz", "net_demand_bps", "port", "automotive_ethernet", "poe_w",
    "time_sensitive", "provenance",
)


def parse_rig(document: str) -> RigSpec:
    """Parse a YAML rig document into a :class:`RigSpec` with defaults resolved.

    Raises:
        RigParseError: on YAML syntax errors, unknown or mistyped fields and
            negative physical quantities.
    """
    try:
        data = yaml.load(document, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise RigParseError(f"syntax error: {exc.problem or exc}", line=line, column=col) from None
    except yaml.YAMLError as exc:
        raise RigParseError(f"syntax error: {exc}") from None
    if data is None:
        raise RigParseError("empty document")
    top = _Reader(data, "", ("name", "vehicle", "sensors", "network", "power"))
    name = top.text("name", required=True)

    if not top.has("vehicle"):
        raise RigParseError("missing required field 'vehicle'", "vehicle")
    veh = _Reader(top.raw("vehicle"), "vehicle", ("occluders", "provenance"), top.where("vehicle"))
    occluders = []
    for i, item in enumerate(veh.items("occluders")):
        r = _Reader(item, f"vehicle.occluders[{i}]", ("name", "center", "half_extents", "yaw_deg"))
        occluders.append(
            OrientedBox(
                center=r.vector("center", 3),
                half_extents=r.vector("half_extents", 3, positive=True),
                yaw_deg=r.number("yaw_deg", 0.0),
                name=r.text("name", ""),
            )
        )
    vehicle = VehicleBody(tuple(occluders), veh.text("provenance"))

    net_data = top.raw("network") or {}
    network = _parse_network(net_data, top.where("network"))

    sensors = []
    explicit_ports = set()
    pending_auto = []
    for i, item in enumerate(top.items("sensors")):
        sensor, auto = _parse_sensor(item, f"sensors[{i}]", network)
        if auto:
            pending_auto.append(len(sensors))
        elif sensor.port is not None:
            explicit_ports.add(sensor.port)
        sensors.append(sensor)
    router = network.router
    if router is not None and router.port is not None:
        explicit_ports.add(router.port)
    free = (p for p in range(1, 10**6) if p not in explicit_ports)
    for idx in pending_auto:
        sensors[idx] = replace(sensors[idx], port=next(free))
    if router is not None and router.port is None:
        network = replace(network, router=replace(router, port=next(free)))

    power = _parse_power(top.raw("power"), top.where("power")) if top.has("power") else None
    return RigSpec(name=name, vehicle=vehicle, sensors=tuple(sensors), network=network, power=power)


def _parse_sensor(item: Any, path: str, network: NetConfig) -> tuple[Sensor, bool]:
    r = _Reader(item, path, SENSOR_FIELDS)
    modality = r.text("modality", required=True)
    if modality not in MODALITIES:
        raise r._fail("modality", f"unknown modality {modality!r}; expected one of {', '.join(MODALITIES)}")
    need_frustum = modality in FRUSTUM_MODALITIES
    resolution = r.raw("resolution")
    if resolution is not None:
        if isinstance(resolution, list) and len(resolution) == 2 and all(isinstance(v, int) and v > 0 for v in resolution):
            resolution = (resolution[0], resolution[1])
        elif isinstance(resolution, int) and not isinstance(resolution, bool) and resolution > 0:
            pass
        else:
            raise r._fail("resolution", "expected a positive line count or [width, height] in pixels")
    port_raw = r.raw("port", "auto")
    auto = False
    if port_raw == "auto":
        port, auto = None, True
    elif port_raw in ("unconnected", None):
        port = None
    else:
        port = r.number("port", integer=True, minimum=1)
    demand = r.number("net_demand_bps", minimum=0, integer=True)
    if demand is None and (port is not None or auto):
        demand = network.device_link_bps
    sensor = Sensor(
        id=r.text("id", required=True),
        modality=modality,
        position_m=r.vector("position_m", 3),
        yaw_deg=r.number("yaw_deg", 0.0),
        pitch_deg=r.number("pitch_deg", 0.0),
        roll_deg=r.number("roll_deg", 0.0),
        azimuth_fov_deg=r.number("azimuth_fov_deg", required=need_frustum, minimum=0),
        elevation_fov_deg=r.number("elevation_fov_deg", required=need_frustum, minimum=0),
        max_range_m=r.number("max_range_m", required=need_frustum, minimum=0),
        resolution=resolution,
        frame_rate_hz=r.number("frame_rate_hz", minimum=0),
        net_demand_bps=demand,
        port=port,
        automotive_ethernet=r.flag("automotive_ethernet", False),
        poe_w=r.number("poe_w", 0.0, minimum=0),
        time_sensitive=r.flag("time_sensitive", modality != "v2x"),
        provenance=r.text("provenance"),
    )
    return sensor, auto


def _parse_network(data: Any, where) -> NetConfig:
    r = _Reader(data, "network", ("switch", "server", "device_link_bps", "router", "vlans", "trunk_vlans", "grandmaster"), where)
    d = NetConfig()
    sw = _Reader(r.raw("switch") or {}, "network.switch", ("id", "ports", "poe_budget_w"), r.where("switch"))
    sv = _Reader(r.raw("server") or {}, "network.server",
                 ("id", "bond_members", "member_capacity_bps", "disk_write_bps"), r.where("server"))
    router = None
    if r.has("router"):
        rr = _Reader(r.raw("router"), "network.router", ("id", "port", "vlan", "uplink", "available"), r.where("router"))
        port_raw = rr.raw("port", "auto")
        router = RouterConfig(
            id=rr.text("id", "router"),
            port=None if port_raw == "auto" else rr.number("port", integer=True, minimum=1),
            vlan=rr.number("vlan", 100, integer=True, minimum=1),
            uplink=rr.text("uplink", "5g"),
            available=rr.flag("available", True),
        )
    vlans = {}
    if r.has("vlans"):
        vr = _Reader(r.raw("vlans"), "network.vlans", MODALITIES, r.where("vlans"))
        for key in vr.data:
            vlans[key] = vr.number(key, integer=True, minimum=1, required=True)
    trunk = None
    if r.has("trunk_vlans"):
        raw = r.raw("trunk_vlans")
        if not isinstance(raw, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw):
            raise r._fail("trunk_vlans", "expected a list of VLAN ids")
        trunk = tuple(raw)
    gm = r.raw("grandmaster")
    if gm is None:
        grandmaster: tuple[str, ...] = ()
    elif isinstance(gm, str):
        grandmaster = (gm,)
    elif isinstance(gm, list) and all(isinstance(g, str) for g in gm):
        grandmaster = tuple(gm)
    else:
        raise r._fail("grandmaster", "expected a node id or a list of node ids")
    return NetConfig(
        switch_id=sw.text("id", d.switch_id),
        switch_ports=sw.number("ports", d.switch_ports, integer=True, minimum=0),
        poe_budget_w=sw.number("poe_budget_w", d.poe_budget_w, minimum=0),
        device_link_bps=r.number("device_link_bps", d.device_link_bps, integer=True, minimum=0),
        server_id=sv.text("id", d.server_id),
        bond_members=sv.number("bond_members", d.bond_members, integer=True, minimum=0),
        member_capacity_bps=sv.number("member_capacity_bps", d.member_capacity_bps, integer=True, minimum=0),
        disk_write_bps=sv.number("disk_write_bps", None, integer=True, minimum=0),
        router=router,
        vlans=vlans,
        trunk_vlans=trunk,
        grandmaster=grandmaster,
    )


def _parse_power(data: Any, where) -> PowerSystem:
    r = _Reader(data, "power", ("battery", "rails", "loads", "boosters", "shore_charger_w", "shore_ac_passthrough_w"), where)
    b = _Reader(r.raw("battery") or {}, "power.battery", ("capacity_wh", "voltage_v"), r.where("battery"))
    battery = Battery(b.number("capacity_wh", required=True, minimum=0), b.number("voltage_v", 24.0, minimum=0))
    rails = dict(DEFAULT_EFFICIENCY)
    if r.has("rails"):
        rr = _Reader(r.raw("rails"), "power.rails", RAILS, r.where("rails"))
        for key in rr.data:
            rails[key] = rr.number(key, required=True, minimum=0)
    loads = []
    for i, item in enumerate(r.items("loads")):
        lr = _Reader(item, f"power.loads[{i}]", ("name", "rail", "draw_w", "group", "provenance"))
        loads.append(
            Load(
                name=lr.text("name", required=True),
                rail=lr.text("rail", required=True),
                draw_w=lr.number("draw_w", required=True, minimum=0),
                group=lr.text("group", required=True),
                provenance=lr.text("provenance"),
            )
        )
    boosters = Boosters()
    if r.has("boosters"):
        br = _Reader(r.raw("boosters"), "power.boosters", ("count", "unit_w", "available"), r.where("boosters"))
        boosters = Boosters(
            count=br.number("count", 0, integer=True, minimum=0),
            unit_w=br.number("unit_w", 0.0, minimum=0),
            available=br.flag("available", True),
        )
    return PowerSystem(
        battery=battery,
        rails=rails,
        loads=tuple(loads),
        boosters=boosters,
        shore_charger_w=r.number("shore_charger_w", 0.0, minimum=0),
        shore_ac_passthrough_w=r.number("shore_ac_passthrough_w", 0.0, minimum=0),
    )


def load_rig(path: str | Path) -> RigSpec:
    return parse_rig(Path(path).read_text(encoding="utf-8"))


def bundled_rig_text(name: str = BUNDLED_RIG) -> str:
    return resources.files("rigplan.data").joinpath(f"{name}.yaml").read_text(encoding="utf-8")


def load_bundled(name: str = BUNDLED_RIG) -> RigSpec:
    return parse_rig(bundled_rig_text(name))


# -- serialization -------------------------------------------------------------


def rig_to_document(rig: RigSpec) -> dict:
    doc: dict[str, Any] = {"name": rig.name}
    vehicle: dict[str, Any] = {}
    if rig.vehicle.provenance is not None:
        vehicle["provenance"] = rig.vehicle.provenance
    vehicle["occluders"] = [
        {"name": b.name, "center": list(b.center), "half_extents": list(b.half_extents), "yaw_deg": b.yaw_deg}
        for b in rig.vehicle.occluders
    ]
    doc["vehicle"] = vehicle
    doc["sensors"] = [_sensor_doc(s) for s in rig.sensors]
    doc["network"] = _network_doc(rig.network)
    if rig.power is not None:
        doc["power"] = _power_doc(rig.power)
    return doc


def _sensor_doc(s: Sensor) -> dict:
    d: dict[str, Any] = {
        "id": s.id,
        "modality": s.modality,
        "position_m": list(s.position_m),
        "yaw_deg": s.yaw_deg,
        "pitch_deg": s.pitch_deg,
        "roll_deg": s.roll_deg,
    }
    for key in ("azimuth_fov_deg", "elevation_fov_deg", "max_range_m"):
        if getattr(s, key) is not None:
            d[key] = getattr(s, key)
    if s.resolution is not None:
        d["resolution"] = list(s.resolution) if isinstance(s.resolution, tuple) else s.resolution
    if s.frame_rate_hz is not None:
        d["frame_rate_hz"] = s.frame_rate_hz
    if s.net_demand_bps is not None:
        d["net_demand_bps"] = s.net_demand_bps
    d["port"] = s.port if s.port is not None else "unconnected"
    d["automotive_ethernet"] = s.automotive_ethernet
    d["poe_w"] = s.poe_w
    d["time_sensitive"] = s.time_sensitive
    if s.provenance is not None:
        d["provenance"] = s.provenance
    return d


def _network_doc(n: NetConfig) -> dict:
    server: dict[str, Any] = {
        "id": n.server_id,
        "bond_members": n.bond_members,
        "member_capacity_bps": n.member_capacity_bps,
    }
    if n.disk_write_bps is not None:
        server["disk_write_bps"] = n.disk_write_bps
    d: dict[str, Any] = {
        "switch": {"id": n.switch_id, "ports": n.switch_ports, "poe_budget_w": n.poe_budget_w},
        "server": server,
        "device_link_bps": n.device_link_bps,
    }
    if n.router is not None:
        r = n.router
        d["router"] = {"id": r.id, "port": r.port if r.port is not None else "auto", "vlan": r.vlan,
                       "uplink": r.uplink, "available": r.available}
    d["vlans"] = dict(n.vlans)
    if n.trunk_vlans is not None:
        d["trunk_vlans"] = list(n.trunk_vlans)
    d["grandmaster"] = list(n.grandmaster)
    return d


def _power_doc(p: PowerSystem) -> dict:
    loads = []
    for ld in p.loads:
        item: dict[str, Any] = {"name": ld.name, "rail": ld.rail, "draw_w": ld.draw_w, "group": ld.group}
        if ld.provenance is not None:
            item["provenance"] = ld.provenance
        loads.append(item)
    return {
        "battery": {"capacity_wh": p.battery.capacity_wh, "voltage_v": p.battery.voltage_v},
        "rails": dict(p.rails),
        "loads": loads,
        "boosters": {"count": p.boosters.count, "unit_w": p.boosters.unit_w, "available": p.boosters.available},
        "shore_charger_w": p.shore_charger_w,
        "shore_ac_passthrough_w": p.shore_ac_passthrough_w,
    }


def dump_rig(rig: RigSpec) -> str:
    return yaml.safe_dump(rig_to_document(rig), sort_keys=False, default_flow_style=None, width=100)


# -- validation ------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    path: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[Finding, ...] = ()
    warnings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [f.code for f in self.errors]


def validate_rig(rig: RigSpec) -> ValidationReport:
    """Check type invariants and cross references. Findings come back in document order."""
    errors: list[Finding] = []
    warnings: list[Finding] = []

    def err(code, msg, path):
        errors.append(Finding(code, msg, path))

    def warn(code, msg, path):
        warnings.append(Finding(code, msg, path))

    if not rig.vehicle.occluders:
        err("NO_OCCLUDER", "vehicle needs at least one occluder (the body shell)", "vehicle.occluders")
    for i, box in enumerate(rig.vehicle.occluders):
        if any(h <= 0 for h in box.half_extents):
            err("EXTENT_NONPOSITIVE", "occluder half-extents must be positive", f"vehicle.occluders[{i}].half_extents")

    net = rig.network
    seen_ids: dict[str, int] = {}
    ports: dict[int, str] = {}
    if net.router is not None and net.router.port is not None:
        ports[net.router.port] = net.router.id
    infra = {net.switch_id, net.server_id} | ({net.router.id} if net.router else set())
    networked = 0
    poe_total = 0.0
    for i, s in enumerate(rig.sensors):
        p = f"sensors[{i}]"
        if s.id in seen_ids:
            err("DUPLICATE_ID", f"sensor id {s.id!r} already used by sensors[{seen_ids[s.id]}]", f"{p}.id")
        else:
            seen_ids[s.id] = i
        if s.id in infra:
            err("DUPLICATE_ID", f"sensor id {s.id!r} collides with a network node", f"{p}.id")
        if s.modality not in MODALITIES:
            err("MODALITY_UNKNOWN", f"unknown modality {s.modality!r}", f"{p}.modality")
        if s.modality in FRUSTUM_MODALITIES:
            if s.azimuth_fov_deg is None or not 0 < s.azimuth_fov_deg <= 360:
                err("AZIMUTH_FOV_INVALID", "azimuth FOV must be in (0, 360] degrees", f"{p}.azimuth_fov_deg")
            if s.elevation_fov_deg is None or not 0 < s.elevation_fov_deg < 180:
                err("ELEVATION_FOV_INVALID", "elevation FOV must be in (0, 180) degrees", f"{p}.elevation_fov_deg")
            if s.max_range_m is None or not s.max_range_m > 0:
                err("RANGE_NONPOSITIVE", "max_range_m must be positive", f"{p}.max_range_m")
        if s.modality == "camera":
            if not (isinstance(s.resolution, tuple) and len(s.resolution) == 2):
                err("RESOLUTION_INVALID", "cameras need [width, height] in pixels", f"{p}.resolution")
            elif s.azimuth_fov_deg is not None and s.azimuth_fov_deg >= 180:
                err("AZIMUTH_FOV_INVALID", "pinhole cameras need a FOV below 180 degrees", f"{p}.azimuth_fov_deg")
        if s.frame_rate_hz is not None and s.frame_rate_hz <= 0:
            err("FRAME_RATE_NONPOSITIVE", "frame_rate_hz must be positive", f"{p}.frame_rate_hz")
        if s.networked:
            networked += 1
            if s.port < 1 or s.port > net.switch_ports:
                err("PORT_UNKNOWN", f"port {s.port} does not exist on a {net.switch_ports}-port switch", f"{p}.port")
            elif s.port in ports:
                err("PORT_CONFLICT", f"port {s.port} already used by {ports[s.port]!r}", f"{p}.port")
            else:
                ports[s.port] = s.id
            if s.modality not in net.vlans:
                err("VLAN_MISSING", f"no VLAN configured for modality {s.modality!r}", f"{p}.modality")
            if s.net_demand_bps is not None and s.net_demand_bps > net.device_link_bps:
                warn("DEMAND_EXCEEDS_LINK", "net demand exceeds the access link capacity", f"{p}.net_demand_bps")
        if s.poe_w < 0:
            err("DRAW_NEGATIVE", "poe_w must not be negative", f"{p}.poe_w")
        elif s.poe_w > 0:
            if not s.networked:
                err("POE_UNCONNECTED", "PoE device is not attached to the switch", f"{p}.poe_w")
            if s.automotive_ethernet:
                err("POE_UNSUPPORTED", "PoE is not available behind a media converter", f"{p}.poe_w")
            poe_total += s.poe_w
    nodes_total = networked + (1 if net.router is not None else 0)
    if nodes_total > net.switch_ports:
        err("CONFIG_PORTS_EXCEEDED", f"{nodes_total} devices need ports on a {net.switch_ports}-port switch", "network.switch.ports")
    if poe_total > net.poe_budget_w:
        err("POE_BUDGET_EXCEEDED", f"PoE draw {poe_total:g} W exceeds the {net.poe_budget_w:g} W budget", "network.switch.poe_budget_w")
    if net.bond_members < 1:
        err("BOND_EMPTY", "the server bond needs at least one member", "network.server.bond_members")
    if net.router is not None and net.router.port is not None and not 1 <= net.router.port <= net.switch_ports:
        err("PORT_UNKNOWN", f"router port {net.router.port} does not exist", "network.router.port")
    known_nodes = set(seen_ids) | infra
    for gm in net.grandmaster:
        if gm not in known_nodes:
            err("GRANDMASTER_UNKNOWN", f"grandmaster {gm!r} is not a node of this rig", "network.grandmaster")
    if net.trunk_vlans is not None:
        for v in net.trunk_vlans:
            if v not in set(net.vlans.values()) | ({net.router.vlan} if net.router else set()):
                warn("TRUNK_VLAN_UNUSED", f"trunk carries VLAN {v} which no device uses", "network.trunk_vlans")

    pw = rig.power
    if pw is not None:
        if not pw.battery.capacity_wh > 0:
            err("CAPACITY_NONPOSITIVE", "battery capacity must be positive", "power.battery.capacity_wh")
        for rail, eff in pw.rails.items():
            if rail not in RAILS:
                err("RAIL_UNKNOWN", f"unknown rail {rail!r}", f"power.rails.{rail}")
            if not 0 < eff <= 1:
                err("EFFICIENCY_INVALID", "efficiency must be in (0, 1]", f"power.rails.{rail}")
        names = set()
        for i, ld in enumerate(pw.loads):
            p = f"power.loads[{i}]"
            if ld.rail not in pw.rails:
                err("RAIL_UNKNOWN", f"load {ld.name!r} references unknown rail {ld.rail!r}", f"{p}.rail")
            if ld.draw_w < 0:
                err("DRAW_NEGATIVE", "draw_w must not be negative", f"{p}.draw_w")
            if ld.name in names:
                err("DUPLICATE_ID", f"load name {ld.name!r} used twice", f"{p}.name")
            names.add(ld.name)
    return ValidationReport(tuple(errors), tuple(warnings))


# -- digital twin ----------------------------------------------------------------


def extrinsic_matrix(sensor: Sensor) -> np.ndarray:
    """4x4 sensor-to-vehicle homogeneous transform."""
    m = np.eye(4)
    m[:3, :3] = sensor.rotation
    m[:3, 3] = sensor.position_m
    return m


def camera_matrix(sensor: Sensor) -> tuple[float, float, float, float]:
    """(fx, fy, cx, cy) of the distortion-free pinhole matching the camera's FOV."""
    w, h = sensor.resolution
    fx = (w / 2) / math.tan(sensor.azimuth_fov / 2)
    fy = (h / 2) / math.tan(sensor.elevation_fov / 2)
    return fx, fy, w / 2, h / 2


def export_twin(rig: RigSpec) -> dict:
    """Per-sensor extrinsics and intrinsics for a simulator twin.

    Sensors without a frustum (v2x units) are left out.

    Raises:
        TwinExportError: if the rig has validation errors.
    """
    report = validate_rig(rig)
    if not report.ok:
        codes = ", ".join(sorted(set(report.codes())))
        raise TwinExportError(f"rig {rig.name!r} has validation errors: {codes}")
    sensors = []
    for s in rig.sensors:
        if not s.has_frustum:
            continue
        intrinsic: dict[str, Any] = {
            "azimuth_fov_deg": s.azimuth_fov_deg,
            "elevation_fov_deg": s.elevation_fov_deg,
            "max_range_m": s.max_range_m,
            "resolution": list(s.resolution) if isinstance(s.resolution, tuple) else s.resolution,
            "frame_rate_hz": s.frame_rate_hz,
        }
        if s.modality == "camera":
            intrinsic["camera_matrix"] = list(camera_matrix(s))
        sensors.append(
            {
                "id": s.id,
                "modality": s.modality,
                "extrinsic": [float(v) for v in extrinsic_matrix(s).ravel()],
                "intrinsic": intrinsic,
            }
        )
    return {"format": TWIN_FORMAT, "name": rig.name, "frame": "rear_axle_ground_flu", "sensors": sensors}


def dump_twin(twin: Mapping) -> str:
    return json.dumps(twin, indent=2, sort_keys=True) + "\n"


def load_twin(text: str) -> dict:
    """Parse and shape-check a twin document produced by :func:`dump_twin`."""
    try:
        twin = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RigParseError(f"syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(twin, dict) or twin.get("format") != TWIN_FORMAT:
        raise RigParseError(f"not a {TWIN_FORMAT} document")
    for i, s in enumerate(twin.get("sensors", [])):
        if len(s.get("extrinsic", ())) != 16 or "intrinsic" not in s:
            raise RigParseError("sensor entry needs 16 extrinsic numbers and an intrinsic block", f"sensors[{i}]")
    return twin
