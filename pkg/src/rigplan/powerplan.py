"""On-board power system: battery, rails, boosters, shore supply and switched loads.

Powers are in watts, energies in watt-hours, times in seconds unless a name
says otherwise. Positive net battery power means the battery is discharging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

RAILS = ("dc24", "dc12", "ac230")
DEFAULT_EFFICIENCY = {"dc24": 1.0, "dc12": 0.95, "ac230": 0.92}


class UnknownGroupError(KeyError):
    """A switch state refers to a load group the system does not define."""


@dataclass(frozen=True)
class Battery:
    capacity_wh: float
    voltage_v: float = 24.0


@dataclass(frozen=True)
class Load:
    name: str
    rail: str
    draw_w: float
    group: str
    provenance: str | None = None


@dataclass(frozen=True)
class Boosters:
    count: int = 0
    unit_w: float = 0.0
    available: bool = True

    @property
    def total_w(self) -> float:
        return self.count * self.unit_w


@dataclass(frozen=True)
class PowerSystem:
    battery: Battery
    rails: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_EFFICIENCY))
    loads: tuple[Load, ...] = ()
    boosters: Boosters = Boosters()
    shore_charger_w: float = 0.0
    shore_ac_passthrough_w: float = 0.0

    @property
    def groups(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for load in self.loads:
            seen.setdefault(load.group, None)
        return tuple(seen)

    def battery_side_draw(self, load: Load) -> float:
        """Battery-side power needed to deliver ``load.draw_w`` on its rail."""
        return load.draw_w / self.rails[load.rail]


@dataclass(frozen=True)
class SourceState:
    """Which external supplies are connected during a profile segment.

    ``shore_w`` is the power the shore charger offers; it is capped by the
    system's charger rating. ``shore_ac`` enables the AC pass-through.
    """

    boosters: bool = False
    shore_w: float = 0.0
    shore_ac: bool = False


NO_SOURCES = SourceState()


def _active_loads(system: PowerSystem, switch_states: Mapping[str, bool]) -> list[Load]:
    groups = set(system.groups)
    for name in switch_states:
        if name not in groups:
            raise UnknownGroupError(name)
    return [ld for ld in system.loads if switch_states.get(ld.group, False)]


def net_battery_power(
    system: PowerSystem,
    switch_states: Mapping[str, bool],
    sources: SourceState = NO_SOURCES,
) -> float:
    """Net battery power in W for the given switch and source states.

    AC loads are served by the shore pass-through first; whatever is left
    goes through the inverter. Boosters and the shore charger then offset
    the discharge, so the result is negative while charging.
    """
    loads = _active_loads(system, switch_states)
    dc = sum(system.battery_side_draw(ld) for ld in loads if ld.rail != "ac230")
    ac = sum(ld.draw_w for ld in loads if ld.rail == "ac230")
    if sources.shore_ac:
        ac = max(0.0, ac - system.shore_ac_passthrough_w)
    discharge = dc + ac / system.rails["ac230"]
    if sources.boosters and system.boosters.available:
        discharge -= system.boosters.total_w
    discharge -= min(max(sources.shore_w, 0.0), system.shore_charger_w)
    return discharge


def source_offset(system: PowerSystem, sources: SourceState) -> float:
    """Power the boosters and shore charger contribute, in W.

    The AC pass-through is not included: it only offsets AC loads, which a
    bare battery-side load figure does not break down.
    """
    offset = min(max(sources.shore_w, 0.0), system.shore_charger_w)
    if sources.boosters and system.boosters.available:
        offset += system.boosters.total_w
    return offset


def runtime_to_empty(
    system: PowerSystem,
    constant_load: float,
    sources: SourceState = NO_SOURCES,
    soc_wh: float | None = None,
) -> float:
    """Hours until a full (or ``soc_wh``) battery is empty under a constant load.

    ``constant_load`` is the battery-side draw in W. Returns ``math.inf``
    when the sources cover the load.
    """
    energy = system.battery.capacity_wh if soc_wh is None else soc_wh
    net = constant_load - source_offset(system, sources)
    if net <= 0:
        return math.inf
    return energy / net


def indefinite_operation(
    system: PowerSystem,
    switch_states: Mapping[str, bool],
    sources: SourceState = NO_SOURCES,
) -> bool:
    return net_battery_power(system, switch_states, sources) <= 0


@dataclass(frozen=True)
class Segment:
    duration_s: float
    switch_states: Mapping[str, bool]
    sources: SourceState = NO_SOURCES


@dataclass(frozen=True)
class SocEvent:
    t: float
    kind: str  # "depleted", "full", "source_toggled"
    detail: str = ""


@dataclass(frozen=True)
class SocTrace:
    t: tuple[float, ...]
    soc_wh: tuple[float, ...]
    net_w: tuple[float, ...]
    events: tuple[SocEvent, ...]
    capacity_wh: float

    @property
    def depleted(self) -> bool:
        return any(ev.kind == "depleted" for ev in self.events)

    @property
    def depleted_at(self) -> float | None:
        for ev in self.events:
            if ev.kind == "depleted":
                return ev.t
        return None


def simulate_soc(
    system: PowerSystem,
    profile: Sequence[Segment],
    dt: float,
    initial_soc_wh: float | None = None,
) -> SocTrace:
    """Step the state of charge through a piecewise-constant load profile.

    Within a segment the net power is constant, so each Euler step is
    evaluated from the segment start rather than accumulated; the trace is
    then exact at every sample up to float rounding. The last step of a
    segment is shortened so segment boundaries are always sampled. Hitting
    zero emits a ``depleted`` event at the exact crossing time and stops
    the trace; hitting capacity clamps (``full`` event) and holds.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cap = system.battery.capacity_wh
    soc = cap if initial_soc_wh is None else float(initial_soc_wh)
    ts: list[float] = [0.0]
    socs: list[float] = [soc]
    nets: list[float] = []
    events: list[SocEvent] = []
    t0 = 0.0
    prev_sources: SourceState | None = None
    for seg in profile:
        if seg.duration_s <= 0:
            raise ValueError("segment durations must be positive")
        net = net_battery_power(system, seg.switch_states, seg.sources)
        if prev_sources is not None and seg.sources != prev_sources:
            events.append(SocEvent(t0, "source_toggled", _describe_sources(seg.sources)))
        prev_sources = seg.sources
        if not nets:
            nets.append(net)
        else:
            # the sample at a segment boundary reports the power from then on
            nets[-1] = net
        soc0 = soc
        held_full = False
        n = max(1, math.ceil(seg.duration_s / dt - 1e-9))
        for i in range(1, n + 1):
            elapsed = seg.duration_s if i == n else i * dt
            t = t0 + elapsed
            if held_full:
                value = cap
            else:
                value = soc0 - net * elapsed / 3600.0
            if value <= 0.0 and net > 0:
                t_hit = t0 + soc0 * 3600.0 / net
                ts.append(t_hit)
                socs.append(0.0)
                nets.append(net)
                events.append(SocEvent(t_hit, "depleted"))
                return SocTrace(tuple(ts), tuple(socs), tuple(nets), tuple(events), cap)
            if value >= cap and net < 0 and not held_full:
                held_full = True
                if soc0 < cap:
                    events.append(SocEvent(t0 + (cap - soc0) * 3600.0 / -net, "full"))
                value = cap
            ts.append(t)
            socs.append(value)
            nets.append(net)
        soc = socs[-1]
        t0 += seg.duration_s
    if not nets:
        nets.append(0.0)
    return SocTrace(tuple(ts), tuple(socs), tuple(nets), tuple(events), cap)


def _describe_sources(s: SourceState) -> str:
    parts = []
    if s.boosters:
        parts.append("boosters")
    if s.shore_w > 0:
        parts.append(f"shore_charger={s.shore_w:g}W")
    if s.shore_ac:
        parts.append("shore_ac")
    return ",".join(parts) or "battery_only"


def analytic_soc(system: PowerSystem, profile: Sequence[Segment], initial_soc_wh: float | None = None) -> list[tuple[float, float]]:
    """SoC at every segment boundary, integrating each constant segment in closed form.

    No clamping is applied; callers compare against unclamped traces.
    """
    soc = system.battery.capacity_wh if initial_soc_wh is None else initial_soc_wh
    t = 0.0
    out = [(t, soc)]
    for seg in profile:
        net = net_battery_power(system, seg.switch_states, seg.sources)
        soc = soc - net * seg.duration_s / 3600.0
        t += seg.duration_s
        out.append((t, soc))
    return out


@dataclass(frozen=True)
class PowerSummary:
    end_t: float
    end_soc_wh: float
    final_net_w: float
    depleted_at: float | None
    runtime_h: float  # math.inf when the final state is sustainable

    @property
    def indefinite(self) -> bool:
        return math.isinf(self.runtime_h)


def summarize(trace: SocTrace) -> PowerSummary:
    """Total runtime, extrapolating the final segment's power past the profile end."""
    end_t = trace.t[-1]
    end_soc = trace.soc_wh[-1]
    net = trace.net_w[-1]
    if trace.depleted:
        runtime = trace.depleted_at / 3600.0
    elif net <= 0:
        runtime = math.inf
    else:
        runtime = (end_t + end_soc * 3600.0 / net) / 3600.0
    return PowerSummary(end_t, end_soc, net, trace.depleted_at, runtime)


class ProfileError(ValueError):
    pass


PROFILE_FIELDS = {"duration_s", "groups_on", "boosters", "shore_w", "shore_ac"}


def parse_profile(data: Mapping | Sequence, system: PowerSystem) -> list[Segment]:
    """Build segments from a loaded profile document.

    The document is either a list of segments or a mapping with a
    ``segments`` list. Each segment has ``duration_s``, ``groups_on`` (a
    list of group names or ``"all"``) and optional ``boosters``,
    ``shore_w`` and ``shore_ac``. Groups not listed are off.

    Raises:
        ProfileError: malformed segments.
        UnknownGroupError: a segment names a group the system lacks.
    """
    if isinstance(data, Mapping):
        if set(data) - {"segments", "name"}:
            raise ProfileError(f"unknown profile keys: {sorted(set(data) - {'segments', 'name'})}")
        data = data.get("segments")
    if not isinstance(data, list) or not data:
        raise ProfileError("profile needs a non-empty list of segments")
    groups = system.groups
    segments = []
    for i, raw in enumerate(data):
        if not isinstance(raw, Mapping):
            raise ProfileError(f"segment {i} is not a mapping")
        extra = set(raw) - PROFILE_FIELDS
        if extra:
            raise ProfileError(f"segment {i}: unknown keys {sorted(extra)}")
        duration = raw.get("duration_s")
        if isinstance(duration, bool) or not isinstance(duration, (int, float)) or duration <= 0:
            raise ProfileError(f"segment {i}: duration_s must be a positive number")
        on = raw.get("groups_on", [])
        if on == "all":
            on = list(groups)
        if not isinstance(on, list):
            raise ProfileError(f"segment {i}: groups_on must be a list or 'all'")
        for name in on:
            if name not in groups:
                raise UnknownGroupError(name)
        shore_w = raw.get("shore_w", 0.0)
        if isinstance(shore_w, bool) or not isinstance(shore_w, (int, float)) or shore_w < 0:
            raise ProfileError(f"segment {i}: shore_w must be a non-negative number")
        sources = SourceState(
            boosters=bool(raw.get("boosters", False)),
            shore_w=float(shore_w),
            shore_ac=bool(raw.get("shore_ac", False)),
        )
        segments.append(Segment(float(duration), {g: g in on for g in groups}, sources))
    return segments
