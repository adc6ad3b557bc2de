import math

import pytest
from hypothesis import given, settings, strategies as st

from rigplan.powerplan import (
    NO_SOURCES,
    Battery,
    Boosters,
    Load,
    PowerSystem,
    ProfileError,
    Segment,
    SourceState,
    UnknownGroupError,
    analytic_soc,
    indefinite_operation,
    net_battery_power,
    parse_profile,
    runtime_to_empty,
    simulate_soc,
    summarize,
)

SHORE = SourceState(shore_w=3000.0)


def system(*loads, boosters=Boosters(2, 600.0), charger=3000.0, passthrough=3000.0, capacity=10_000.0):
    return PowerSystem(
        battery=Battery(capacity),
        loads=tuple(loads),
        boosters=boosters,
        shore_charger_w=charger,
        shore_ac_passthrough_w=passthrough,
    )


def flat(draw_w, rail="dc24", group="main"):
    return system(Load(group, rail, draw_w, group))


ON = {"main": True}


# -- net battery power ---------------------------------------------------------------


def test_all_off_draws_nothing(bundled):
    assert net_battery_power(bundled.power, {g: False for g in bundled.power.groups}) == 0.0
    assert net_battery_power(bundled.power, {}) == 0.0


def test_constant_load_no_sources():
    assert net_battery_power(flat(1300.0), ON) == 1300.0


def test_boosters_offset_discharge():
    assert net_battery_power(flat(2300.0), ON, SourceState(boosters=True)) == 1100.0


def test_unavailable_boosters_do_nothing():
    sys_ = system(Load("main", "dc24", 2300.0, "main"), boosters=Boosters(2, 600.0, available=False))
    assert net_battery_power(sys_, ON, SourceState(boosters=True)) == 2300.0


def test_rail_efficiency_applied():
    sys_ = system(Load("a", "dc12", 95.0, "g"), Load("b", "ac230", 92.0, "g"))
    assert net_battery_power(sys_, {"g": True}) == pytest.approx(200.0)


def test_shore_charger_capped_at_rating():
    assert net_battery_power(flat(1000.0), ON, SourceState(shore_w=5000.0)) == -2000.0


def test_unknown_group_rejected():
    with pytest.raises(UnknownGroupError):
        net_battery_power(flat(10.0), {"lasers": True})


def test_bundled_regular_and_stress_draws(bundled):
    # AC 598 W / 0.92 + DC12 152 W / 0.95 + DC24 490 W = 650 + 160 + 490
    states = {g: g != "compute_stress" for g in bundled.power.groups}
    assert net_battery_power(bundled.power, states) == pytest.approx(1300.0, abs=1e-9)
    # the stress group adds 920 W AC / 0.92
    everything = {g: True for g in bundled.power.groups}
    assert net_battery_power(bundled.power, everything) == pytest.approx(2300.0, abs=1e-9)


# -- runtime --------------------------------------------------------------------------


def test_regular_runtime():
    assert runtime_to_empty(flat(0), 1300.0) == pytest.approx(7.692, abs=1e-3)


def test_stress_runtime():
    assert runtime_to_empty(flat(0), 2300.0) == pytest.approx(4.348, abs=1e-3)


def test_shore_charger_covering_load_is_infinite():
    assert runtime_to_empty(flat(0), 2300.0, SHORE) == math.inf
    assert runtime_to_empty(flat(0), 3000.0, SHORE) == math.inf


def test_runtime_with_boosters():
    assert runtime_to_empty(flat(0), 2300.0, SourceState(boosters=True)) == pytest.approx(10_000 / 1100)


@settings(max_examples=300)
@given(st.floats(1.0, 1e5), st.floats(1.0, 1e4))
def test_runtime_times_power_is_energy(energy, power):
    sys_ = system(capacity=energy)
    assert runtime_to_empty(sys_, power) * power == pytest.approx(energy, rel=1e-15)


@settings(max_examples=300)
@given(st.floats(1.0, 5e3), st.floats(0.0, 5e3), st.sampled_from(["dc24", "dc12", "ac230"]))
def test_more_load_never_runs_longer(draw, extra, rail):
    base = system(Load("a", rail, draw, "g"))
    more = system(Load("a", rail, draw + extra, "g"))
    r1 = runtime_to_empty(base, net_battery_power(base, {"g": True}))
    r2 = runtime_to_empty(more, net_battery_power(more, {"g": True}))
    assert r2 <= r1


# -- indefinite operation --------------------------------------------------------------


def test_stress_on_shore_is_indefinite():
    assert indefinite_operation(flat(2300.0), ON, SHORE)


def test_stress_without_sources_is_finite():
    assert not indefinite_operation(flat(2300.0), ON, NO_SOURCES)


def test_ac_passthrough_bypasses_battery():
    sys_ = system(Load("main", "ac230", 2300.0, "main"), charger=0.0)
    assert net_battery_power(sys_, ON, SourceState(shore_ac=True)) == 0.0
    assert indefinite_operation(sys_, ON, SourceState(shore_ac=True))


def test_passthrough_does_not_help_dc_loads():
    sys_ = system(Load("main", "dc24", 500.0, "main"), charger=0.0)
    assert net_battery_power(sys_, ON, SourceState(shore_ac=True)) == 500.0


def test_bundled_full_load_on_shore(bundled):
    everything = {g: True for g in bundled.power.groups}
    assert indefinite_operation(bundled.power, everything, SHORE)


# -- simulation -------------------------------------------------------------------------


def test_constant_regular_load_depletes():
    trace = simulate_soc(flat(1300.0), [Segment(40_000.0, ON)], dt=60.0)
    assert trace.depleted
    assert trace.depleted_at == pytest.approx(27_692.3, abs=60.0)
    assert trace.depleted_at == pytest.approx(10_000 * 3600 / 1300, rel=1e-12)
    assert trace.soc_wh[-1] == 0.0
    assert min(trace.soc_wh) >= 0.0


def test_zero_load_keeps_charge():
    trace = simulate_soc(flat(1300.0), [Segment(7200.0, {"main": False})], dt=60.0)
    assert set(trace.soc_wh) == {10_000.0}
    assert trace.events == ()


def test_stress_then_shore_recovery():
    sys_ = system(Load("base", "dc24", 1300.0, "base"), Load("stress", "dc24", 1000.0, "stress"))
    profile = [
        Segment(3600.0, {"base": True, "stress": True}),
        Segment(3600.0, {"base": True, "stress": False}, SHORE),
    ]
    trace = simulate_soc(sys_, profile, dt=60.0)
    # 10 kWh - 2.3 kW * 1 h, then + (3.0 - 1.3) kW * 1 h
    at = dict(zip(trace.t, trace.soc_wh))
    assert at[3600.0] == 7700.0
    assert at[7200.0] == 9400.0
    assert trace.net_w[-1] == -1700.0
    assert [e.kind for e in trace.events] == ["source_toggled"]


def test_charging_clamps_at_capacity():
    trace = simulate_soc(flat(1000.0), [Segment(3600.0, ON, SHORE)], dt=60.0, initial_soc_wh=9900.0)
    assert max(trace.soc_wh) == 10_000.0
    full = [e for e in trace.events if e.kind == "full"]
    assert len(full) == 1 and full[0].t == pytest.approx(180.0)


def test_segment_boundaries_are_sampled():
    trace = simulate_soc(flat(100.0), [Segment(90.0, ON), Segment(50.0, ON)], dt=60.0)
    assert trace.t == (0.0, 60.0, 90.0, 140.0)


def test_simulation_preconditions():
    with pytest.raises(ValueError):
        simulate_soc(flat(1.0), [Segment(10.0, ON)], dt=0)
    with pytest.raises(ValueError):
        simulate_soc(flat(1.0), [Segment(0.0, ON)], dt=1)


def test_summary_extrapolates_last_segment():
    trace = simulate_soc(flat(1300.0), [Segment(3600.0, ON)], dt=60.0)
    assert summarize(trace).runtime_h == pytest.approx(10_000 / 1300, rel=1e-12)
    shore = summarize(simulate_soc(flat(2300.0), [Segment(3600.0, ON, SHORE)], dt=60.0))
    assert shore.indefinite


segments = st.lists(
    st.tuples(
        st.floats(1.0, 20_000.0),
        st.booleans(),
        st.booleans(),
        st.booleans(),
        st.floats(0.0, 3000.0),
    ),
    min_size=1,
    max_size=8,
)


@settings(max_examples=300, deadline=None)
@given(segments, st.floats(1.0, 900.0))
def test_energy_balance_matches_closed_form(raw, dt):
    sys_ = system(Load("a", "dc24", 400.0, "a"), Load("b", "ac230", 700.0, "b"), capacity=1e6)
    profile = [Segment(d, {"a": a, "b": b}, SourceState(boosters=boost, shore_w=0.0))
               for d, a, b, boost, _ in raw]
    # a large battery starting half full never clamps or depletes here
    trace = simulate_soc(sys_, profile, dt, initial_soc_wh=5e5)
    expected = analytic_soc(sys_, profile, initial_soc_wh=5e5)
    sampled = dict(zip(trace.t, trace.soc_wh))
    for t, soc in expected:
        key = min(sampled, key=lambda s: abs(s - t))
        assert abs(key - t) <= 1e-6 * max(1.0, t)
        assert abs(sampled[key] - soc) <= 1e-9 * abs(soc)


def test_toggling_group_removes_exactly_its_draws(bundled):
    power = bundled.power
    everything = {g: True for g in power.groups}
    full = net_battery_power(power, everything)
    for group in power.groups:
        own = sum(power.battery_side_draw(ld) for ld in power.loads if ld.group == group)
        without = net_battery_power(power, {**everything, group: False})
        assert full - without == pytest.approx(own, abs=1e-9)


# -- profiles ---------------------------------------------------------------------------


def test_parse_profile(bundled):
    segs = parse_profile({"segments": [{"duration_s": 60, "groups_on": ["compute"], "shore_w": 100}]}, bundled.power)
    assert segs[0].switch_states["compute"] and not segs[0].switch_states["camera"]
    assert segs[0].sources.shore_w == 100.0
    everything = parse_profile([{"duration_s": 1, "groups_on": "all"}], bundled.power)
    assert all(everything[0].switch_states.values())


@pytest.mark.parametrize("doc", [
    [],
    {"segments": [{"duration_s": -1}]},
    {"segments": [{"duration_s": 10, "colour": 1}]},
    {"segments": [{"duration_s": 10, "groups_on": "compute"}]},
    {"segments": [{"duration_s": 10, "shore_w": -5}]},
    {"segments": [], "extra": 1},
])
def test_bad_profiles(bundled, doc):
    with pytest.raises(ProfileError):
        parse_profile(doc, bundled.power)


def test_profile_unknown_group(bundled):
    with pytest.raises(UnknownGroupError):
        parse_profile([{"duration_s": 10, "groups_on": ["warp_drive"]}], bundled.power)
