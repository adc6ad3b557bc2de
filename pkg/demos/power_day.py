"""A day of operation: drive on battery, stress test, then plug in."""
import math

from rigplan import load_bundled
from rigplan.powerplan import (
    Segment, SourceState, indefinite_operation, net_battery_power, runtime_to_empty, simulate_soc, summarize,
)

power = load_bundled().power
regular = {g: g != "compute_stress" for g in power.groups}
everything = {g: True for g in power.groups}

for label, states in (("regular", regular), ("stress", everything)):
    w = net_battery_power(power, states)
    print(f"{label:<8} {w:7.1f} W from the battery -> {runtime_to_empty(power, w):.2f} h")

boost = SourceState(boosters=True)
print(f"stress with boosters -> {runtime_to_empty(power, net_battery_power(power, everything), boost):.2f} h")
print("stress on a 3 kW shore charger runs forever:", indefinite_operation(power, everything, SourceState(shore_w=3000)))

shore = SourceState(shore_w=3000.0)
day = [
    Segment(3 * 3600, regular),                 # morning drive
    Segment(3600, everything, boost),           # stress test, engine running
    Segment(2 * 3600, regular),                 # drive back
    Segment(2 * 3600, regular, shore),          # parked at the lab
]
trace = simulate_soc(power, day, dt=300)
for ev in trace.events:
    print(f"  t={ev.t / 3600:5.2f} h  {ev.kind} {ev.detail}")
hourly = [(t, s) for t, s in zip(trace.t, trace.soc_wh) if math.isclose(t % 3600, 0, abs_tol=1e-6)]
for t, soc in hourly:
    print(f"  {t / 3600:4.0f} h  {soc:8.1f} Wh  " + "#" * int(soc / 250))
s = summarize(trace)
print("ends with", round(s.end_soc_wh), "Wh;", "indefinite" if s.indefinite else f"{s.runtime_h:.2f} h total")
