"""``rigplan`` command line: validate, coverage, netcheck, powersim, report, export-twin.

Exit codes: 0 all checks passed, 1 a domain check failed, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Sequence

import yaml

from . import coverage as cov
from . import netplan, powerplan
from .model import (
    BUNDLED_RIG,
    RigParseError,
    RigSpec,
    TwinExportError,
    bundled_rig_text,
    dump_twin,
    export_twin,
    parse_rig,
    resolve_group,
    validate_rig,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FULL_CIRCLE_GROUPS = ("lidar_mid_range", "lidar_long_range", "lidar_4d", "camera")


class UsageError(Exception):
    pass


def _load(path: str | None) -> RigSpec:
    if path is None:
        return parse_rig(bundled_rig_text(BUNDLED_RIG))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_rig(text)


def _dump(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False, width=100)


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6g}"


# -- validate ------------------------------------------------------------------


def cmd_validate(args, out) -> int:
    rig = _load(args.rig)
    report = validate_rig(rig)
    out.write(_dump({
        "rig": rig.name,
        "accepted": report.ok,
        "errors": [{"code": f.code, "path": f.path, "message": f.message} for f in report.errors],
        "warnings": [{"code": f.code, "path": f.path, "message": f.message} for f in report.warnings],
    }))
    return EXIT_OK if report.ok else EXIT_FAIL


# -- coverage ------------------------------------------------------------------


def _coverage_groups(arg: list[str] | None) -> list[str]:
    if not arg:
        return list(FULL_CIRCLE_GROUPS)
    groups = []
    for item in arg:
        groups.extend(g for g in item.split(",") if g)
    for g in groups:
        try:
            resolve_group(g)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return groups


def cmd_coverage(args, out) -> int:
    if not args.cell_m > 0 or not args.extent_m > args.cell_m:
        raise UsageError("need --extent-m > --cell-m > 0")
    if not args.radius_m > 0 or not args.step_deg > 0:
        raise UsageError("--radius-m and --step-deg must be positive")
    groups = _coverage_groups(args.group)
    rig = _load(args.rig)
    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    summary = {"rig": rig.name, "query_height_m": args.height_m, "radius_m": args.radius_m, "groups": {}}
    failed = False
    for g in groups:
        az = cov.azimuthal_coverage(rig, g, args.radius_m, args.height_m, math.radians(args.step_deg))
        grid = cov.coverage_grid(rig, g, args.height_m, args.extent_m, args.cell_m, threads=args.threads)
        radius = min(args.radius_m, grid.extent)
        stats = cov.blind_spot_area(grid, radius)
        failed |= not az.complete
        summary["groups"][g] = {
            "sensors": list(grid.sensor_ids),
            "azimuthal_fraction": az.fraction,
            "gaps_deg": [[round(math.degrees(a), 6), round(math.degrees(b), 6)] for a, b in az.gaps],
            "gap_total_deg": round(math.degrees(az.gap_total), 6),
            "verdict": "pass" if az.complete else "fail",
            "area": stats.as_dict(),
        }
        if outdir:
            stem = g.replace(",", "+")
            (outdir / f"coverage_{stem}.pgm").write_bytes(cov.grid_pgm(grid))
            (outdir / f"coverage_{stem}.csv").write_text(cov.grid_csv(grid), encoding="utf-8")
    text = _dump(summary)
    if outdir:
        (outdir / "summary.yaml").write_text(text, encoding="utf-8")
    out.write(text)
    return EXIT_FAIL if failed else EXIT_OK


# -- netcheck -------------------------------------------------------------------


def network_checks(rig: RigSpec, total_demand_bps: float | None = None) -> dict:
    topo = netplan.build_topology(rig)
    demands = netplan.default_demands(rig)
    assignment = netplan.assign_flows(topo, demands)
    capacity = netplan.check_capacity(assignment, topo)
    ptp = netplan.validate_ptp(topo)
    total = total_demand_bps if total_demand_bps is not None else assignment.total_bps
    headroom = None
    if rig.network.disk_write_bps and total > 0 and topo.bond_capacity_bps > 0:
        headroom = netplan.recording_headroom(total, rig.network.disk_write_bps, topo.bond_capacity_bps)
    ok = capacity.ok and ptp.ok and (headroom is None or headroom.ok)
    return {"topology": topo, "assignment": assignment, "capacity": capacity, "ptp": ptp,
            "total_bps": total, "headroom": headroom, "ok": ok}


def _netcheck_text(rig: RigSpec, res: dict) -> str:
    topo, assignment, capacity, ptp = res["topology"], res["assignment"], res["capacity"], res["ptp"]
    lines = [f"network check: {rig.name}", ""]
    lines.append(f"bond capacity      {topo.bond_capacity_bps / 1e9:.3f} Gbit/s ({len(topo.trunk_links)} members)")
    lines.append(f"aggregate demand   {res['total_bps'] / 1e9:.3f} Gbit/s")
    for bid, u in capacity.bond_utilization.items():
        lines.append(f"bond utilization   {bid} {u:.4f}")
    h = res["headroom"]
    if h is not None:
        lines.append(f"disk headroom      {h.disk:.4f}")
        lines.append(f"uplink headroom    {h.uplink:.4f}")
    lines.append(f"PoE draw           {topo.poe_draw_w:g} W of {topo.poe_budget_w:g} W")
    lines += ["", "link utilization", f"  {'link':<40} {'load_bps':>14} {'capacity_bps':>14} {'util':>8}"]
    for ln in topo.links:
        load = assignment.link_loads[ln.id]
        flag = "  OVERLOAD" if ln.id in capacity.overloaded else ""
        lines.append(f"  {ln.id:<40} {load:>14d} {ln.capacity_bps:>14d} {capacity.utilization[ln.id]:>8.4f}{flag}")
    lines += ["", "VLANs"]
    for vid, members in topo.vlans.items():
        trunk = "trunked" if vid in topo.trunk_vlans else "NOT trunked"
        shown = [m for m in members if topo.node(m).role != "converter"]
        lines.append(f"  {vid:>4} ({trunk}): {', '.join(shown)}")
    vlan_ids = list(topo.vlans)
    lines += ["", "VLAN reachability (rows/cols: server, one member per VLAN)"]
    reps = [topo.server] + [next(m for m in topo.vlans[v] if topo.node(m).role != "converter") for v in vlan_ids]
    labels = ["server"] + [str(v) for v in vlan_ids]
    lines.append("  " + " " * 8 + "".join(f"{lab:>8}" for lab in labels))
    for lab, a in zip(labels, reps):
        row = "".join(f"{('yes' if netplan.vlan_reachable(topo, a, b) else '-'):>8}" for b in reps)
        lines.append(f"  {lab:>8}{row}")
    lines += ["", f"PTP grandmaster: {ptp.grandmaster or '-'}"]
    if ptp.depths:
        lines.append(f"PTP max depth from server: {max(ptp.depths.values())} hops")
    for f in ptp.findings:
        lines.append(f"  {f.code} {f.node}: {f.message}")
    lines += ["", f"result: {'pass' if res['ok'] else 'FAIL'}", ""]
    return "\n".join(lines)


def cmd_netcheck(args, out) -> int:
    rig = _load(args.rig)
    report = validate_rig(rig)
    if not report.ok:
        out.write(_dump({"rig": rig.name, "errors": [f"{f.code} {f.path}" for f in report.errors]}))
        return EXIT_FAIL
    try:
        res = network_checks(rig, args.total_demand_bps)
    except netplan.TopologyError as exc:
        out.write(f"{exc}\n")
        return EXIT_FAIL
    out.write(_netcheck_text(rig, res))
    return EXIT_OK if res["ok"] else EXIT_FAIL


# -- powersim --------------------------------------------------------------------


def _load_profile(name: str | None, system: powerplan.PowerSystem) -> list[powerplan.Segment]:
    name = name or "regular-usage"
    path = Path(name)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        res = resources.files("rigplan.data.profiles").joinpath(f"{name}.yaml")
        if not res.is_file():
            raise UsageError(f"no profile file or bundled profile named {name!r}")
        text = res.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise UsageError(f"profile syntax error: {exc}") from None
    try:
        return powerplan.parse_profile(data, system)
    except powerplan.UnknownGroupError as exc:
        raise UsageError(f"profile references unknown switch group {exc.args[0]!r}") from None
    except powerplan.ProfileError as exc:
        raise UsageError(str(exc)) from None


def trace_csv(trace: powerplan.SocTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s", "soc_wh", "net_w"])
    for t, soc, net in zip(trace.t, trace.soc_wh, trace.net_w):
        w.writerow([f"{t:.3f}", f"{soc:.6f}", f"{net:.6f}"])
    return buf.getvalue()


def cmd_powersim(args, out) -> int:
    if not args.dt_s > 0:
        raise UsageError("--dt-s must be positive")
    rig = _load(args.rig)
    if rig.power is None:
        raise UsageError(f"rig {rig.name!r} has no power section")
    profile = _load_profile(args.profile, rig.power)
    trace = powerplan.simulate_soc(rig.power, profile, args.dt_s)
    summary = powerplan.summarize(trace)
    if args.out:
        Path(args.out).write_text(trace_csv(trace), encoding="utf-8")
    out.write(_dump({
        "rig": rig.name,
        "profile": args.profile or "regular-usage",
        "end_t_s": summary.end_t,
        "end_soc_wh": round(summary.end_soc_wh, 6),
        "final_net_w": round(summary.final_net_w, 6),
        "depleted_at_s": summary.depleted_at,
        "runtime_h": "indefinite" if summary.indefinite else round(summary.runtime_h, 4),
        "events": [{"t_s": round(e.t, 3), "kind": e.kind, "detail": e.detail} for e in trace.events],
    }))
    return EXIT_FAIL if trace.depleted else EXIT_OK


# -- report -----------------------------------------------------------------------


def collect_report(rig: RigSpec, threads: int = 1) -> tuple[list[tuple[str, str, str, str]], bool]:
    """Run every check; rows are (section, item, metric, value)."""
    rows: list[tuple[str, str, str, str]] = []
    ok = True
    report = validate_rig(rig)
    rows.append(("validation", rig.name, "errors", str(len(report.errors))))
    rows.append(("validation", rig.name, "warnings", str(len(report.warnings))))
    for f in report.errors:
        rows.append(("validation", f.path, "error", f.code))
    if not report.ok:
        return rows, False

    for g in FULL_CIRCLE_GROUPS + ("radar",):
        az = cov.azimuthal_coverage(rig, g, 10.0, 1.0, math.radians(0.5))
        grid = cov.coverage_grid(rig, g, 1.0, cov.DEFAULT_EXTENT, cov.DEFAULT_CELL, threads=threads)
        stats = cov.blind_spot_area(grid, 10.0)
        # radar has no 360 degree requirement; it is reported but not judged
        judged = g in FULL_CIRCLE_GROUPS
        verdict = ("pass" if az.complete else "FAIL") if judged else "info"
        ok &= az.complete or not judged
        rows.append(("coverage", g, "azimuthal_fraction_r10_h1", f"{az.fraction:.6f}"))
        rows.append(("coverage", g, "gap_total_deg", f"{math.degrees(az.gap_total):.3f}"))
        rows.append(("coverage", g, "covered_area_m2_r10", f"{stats.covered_area:.4f}"))
        rows.append(("coverage", g, "blind_area_m2_r10", f"{stats.blind_area:.4f}"))
        rows.append(("coverage", g, "max_k", str(int(grid.k.max()) if grid.k.size else 0)))
        rows.append(("coverage", g, "verdict", verdict))

    try:
        net = network_checks(rig)
    except netplan.TopologyError as exc:
        rows.append(("network", "topology", "error", exc.code))
        ok = False
    else:
        topo, cap = net["topology"], net["capacity"]
        rows.append(("network", "bond0", "capacity_bps", str(topo.bond_capacity_bps)))
        rows.append(("network", "bond0", "demand_bps", str(net["total_bps"])))
        for bid, u in cap.bond_utilization.items():
            rows.append(("network", bid, "utilization", f"{u:.4f}"))
        for ln in topo.links:
            rows.append(("network", ln.id, "utilization", f"{cap.utilization[ln.id]:.4f}"))
        rows.append(("network", "links", "overloaded", str(len(cap.overloaded))))
        if net["headroom"] is not None:
            rows.append(("network", "recording", "disk_headroom", f"{net['headroom'].disk:.4f}"))
            rows.append(("network", "recording", "uplink_headroom", f"{net['headroom'].uplink:.4f}"))
        rows.append(("network", "ptp", "grandmaster", net["ptp"].grandmaster or "-"))
        for f in net["ptp"].findings:
            rows.append(("network", "ptp", f.code, f.node))
        rows.append(("network", "all", "verdict", "pass" if net["ok"] else "FAIL"))
        ok &= net["ok"]

    p = rig.power
    if p is not None:
        groups = p.groups
        full = {g: True for g in groups}
        regular = {g: g != "compute_stress" for g in groups}
        shore = powerplan.SourceState(shore_w=p.shore_charger_w)
        boost = powerplan.SourceState(boosters=True)
        reg_w = powerplan.net_battery_power(p, regular)
        full_w = powerplan.net_battery_power(p, full)
        rows.append(("power", "regular", "discharge_w", f"{reg_w:.3f}"))
        rows.append(("power", "regular", "runtime_h", _fmt(powerplan.runtime_to_empty(p, reg_w))))
        rows.append(("power", "full_load", "discharge_w", f"{full_w:.3f}"))
        rows.append(("power", "full_load", "runtime_h", _fmt(powerplan.runtime_to_empty(p, full_w))))
        rows.append(("power", "full_load_boosters", "runtime_h", _fmt(powerplan.runtime_to_empty(p, full_w, boost))))
        indefinite = powerplan.indefinite_operation(p, full, shore)
        rows.append(("power", "full_load_shore", "indefinite", "yes" if indefinite else "no"))
        rows.append(("power", "all", "verdict", "pass" if indefinite else "FAIL"))
        ok &= indefinite
    return rows, ok


def _report_text(rig: RigSpec, rows, ok: bool, timestamp: bool) -> str:
    lines = [f"# Rig report: {rig.name}"]
    if timestamp:
        lines.append(f"generated {datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')}")
    section = None
    for sec, item, metric, value in rows:
        if sec != section:
            failed = any(r[0] == sec and r[3] == "FAIL" for r in rows) or (sec == "validation" and any(r[2] == "error" for r in rows))
            lines += ["", f"## {sec}" + ("  [FAILED]" if failed else "")]
            section = sec
        lines.append(f"  {item:<28} {metric:<28} {value}")
    lines += ["", f"overall: {'pass' if ok else 'FAIL'}", ""]
    return "\n".join(lines)


def cmd_report(args, out) -> int:
    rig = _load(args.rig)
    rows, ok = collect_report(rig, threads=args.threads)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "item", "metric", "value"])
        w.writerows(rows)
        w.writerow(["overall", rig.name, "verdict", "pass" if ok else "FAIL"])
        out.write(buf.getvalue())
    else:
        out.write(_report_text(rig, rows, ok, timestamp=not args.no_timestamp))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_export_twin(args, out) -> int:
    rig = _load(args.rig)
    try:
        text = dump_twin(export_twin(rig))
    except TwinExportError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_FAIL
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rigplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("rig", nargs="?", help=f"rig document (default: bundled {BUNDLED_RIG})")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "parse and validate a rig document")

    p = add("coverage", cmd_coverage, "ground-level coverage maps and 360 degree verdicts")
    p.add_argument("--group", action="append", help="modality group (repeatable, comma lists allowed)")
    p.add_argument("--height-m", "--height", dest="height_m", type=float, default=1.0)
    p.add_argument("--extent-m", "--extent", dest="extent_m", type=float, default=cov.DEFAULT_EXTENT)
    p.add_argument("--cell-m", "--cell", dest="cell_m", type=float, default=cov.DEFAULT_CELL)
    p.add_argument("--radius-m", "--radius", dest="radius_m", type=float, default=10.0)
    p.add_argument("--step-deg", type=float, default=0.5)
    p.add_argument("--out", help="directory for graymap, CSV and summary files")
    p.add_argument("--threads", type=int, default=1)

    p = add("netcheck", cmd_netcheck, "bandwidth, VLAN and PTP checks")
    p.add_argument("--total-demand-bps", type=float, default=None, help="override the aggregate sensor demand")

    p = add("powersim", cmd_powersim, "state-of-charge simulation for a load profile")
    p.add_argument("--profile", help="profile file or bundled profile name (default: regular-usage)")
    p.add_argument("--dt-s", "--dt", dest="dt_s", type=float, default=60.0)
    p.add_argument("--out", help="write the CSV trace here")

    p = add("report", cmd_report, "run every check and print a consolidated report")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--no-timestamp", action="store_true", help="omit the generation time from text reports")
    p.add_argument("--threads", type=int, default=1)

    p = add("export-twin", cmd_export_twin, "write the digital-twin sensor bundle (JSON)")
    p.add_argument("--out")
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except (UsageError, RigParseError) as exc:
        sys.stderr.write(f"rigplan: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
