import io
import math
import json
import subprocess
import sys

import pytest
import yaml

from rigplan.cli import main
from rigplan.model import bundled_rig_text

ONE_CAMERA = """
name: one-camera
vehicle:
  occluders:
    - {center: [1.5, 0, 0.7], half_extents: [2.4, 0.95, 0.7]}
sensors:
  - id: front_wide
    modality: camera
    position_m: [2.0, 0.0, 1.6]
    azimuth_fov_deg: 120
    elevation_fov_deg: 90
    max_range_m: 150
    resolution: [2590, 2048]
network:
  vlans: {camera: 20}
power:
  battery: {capacity_wh: 1000}
  loads:
    - {name: cam, rail: dc24, draw_w: 10, group: camera}
"""


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


@pytest.fixture
def rig_file(tmp_path):
    def write(text, name="rig.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


# -- validate ------------------------------------------------------------------------


def test_validate_bundled():
    code, text = run("validate")
    assert code == 0
    assert yaml.safe_load(text)["accepted"] is True


def test_validate_truncated(rig_file):
    text = bundled_rig_text()
    assert run("validate", rig_file(text[: len(text) // 2]))[0] == 2


def test_validate_duplicate_id(rig_file):
    doc = yaml.safe_load(ONE_CAMERA)
    doc["sensors"].append(dict(doc["sensors"][0], position_m=[2.0, 0.5, 1.6]))
    code, text = run("validate", rig_file(yaml.safe_dump(doc)))
    assert code == 1
    assert "DUPLICATE_ID" in text


def test_missing_file_is_usage_error(tmp_path):
    assert run("validate", str(tmp_path / "nope.yaml"))[0] == 2


def test_unknown_subcommand_and_flag():
    assert run("frobnicate")[0] == 2
    assert run("netcheck", "--colour", "red")[0] == 2
    assert run()[0] == 2


# -- coverage ------------------------------------------------------------------------


def test_coverage_bundled_groups(tmp_path):
    code, text = run("coverage", "--extent-m", "12", "--cell-m", "0.2", "--out", str(tmp_path))
    assert code == 0
    summary = yaml.safe_load(text)
    assert set(summary["groups"]) == {"lidar_mid_range", "lidar_long_range", "lidar_4d", "camera"}
    for g in summary["groups"].values():
        assert g["azimuthal_fraction"] == 1.0 and g["gaps_deg"] == []
    assert (tmp_path / "summary.yaml").read_text() == text
    pgm = (tmp_path / "coverage_camera.pgm").read_bytes()
    assert pgm.startswith(b"P5\n120 120\n255\n")
    assert len((tmp_path / "coverage_camera.csv").read_text().splitlines()) == 120 * 120 + 1


def test_coverage_single_forward_camera(rig_file):
    code, text = run("coverage", rig_file(ONE_CAMERA), "--group", "camera", "--extent", "12", "--cell", "0.5")
    assert code == 1
    cam = yaml.safe_load(text)["groups"]["camera"]
    assert cam["verdict"] == "fail"
    assert len(cam["gaps_deg"]) == 1
    # the camera sits 2 m ahead of the circle centre: its 60 degree edge ray
    # meets the r = 10 circle after sqrt(97) - 1 m, at polar angle theta
    t = math.sqrt(97) - 1
    theta = math.degrees(math.atan2(t * math.sqrt(3) / 2, 2 + t / 2))
    assert cam["gap_total_deg"] == pytest.approx(360 - 2 * theta, abs=0.5)
    # about 240 degrees of the horizon, measured from the sensor itself
    assert 230 < cam["gap_total_deg"] < 270


@pytest.mark.parametrize("flags", [["--cell", "0"], ["--cell-m", "-1"], ["--extent", "0.05"],
                                   ["--radius", "0"], ["--group", "sonar"]])
def test_coverage_bad_flags(flags):
    assert run("coverage", *flags)[0] == 2


# -- netcheck ------------------------------------------------------------------------


def test_netcheck_bundled():
    code, text = run("netcheck")
    assert code == 0
    assert "bond0" in text
    assert "0.5" in text
    assert "1.67" in text


def test_netcheck_demand_override():
    code, text = run("netcheck", "--total-demand-bps", "35e9")
    assert code == 1
    assert "0.954" in text


def test_netcheck_without_grandmaster(rig_file):
    code, text = run("netcheck", rig_file(ONE_CAMERA))
    assert code == 1
    assert "PTP_NO_GM" in text


# -- powersim ------------------------------------------------------------------------


def test_powersim_regular(tmp_path):
    out = tmp_path / "trace.csv"
    code, text = run("powersim", "--out", str(out))
    assert code == 0
    assert yaml.safe_load(text)["runtime_h"] == pytest.approx(7.69, abs=0.005)
    rows = out.read_text().splitlines()
    assert rows[0] == "t_s,soc_wh,net_w"
    assert rows[-1].startswith("3600.000,")


def test_powersim_stress_on_shore():
    code, text = run("powersim", "--profile", "stress-shore")
    assert code == 0
    assert yaml.safe_load(text)["runtime_h"] == "indefinite"


def test_powersim_depletion(rig_file, tmp_path):
    profile = tmp_path / "long.yaml"
    profile.write_text("segments:\n  - {duration_s: 40000, groups_on: all}\n")
    code, text = run("powersim", "--profile", str(profile))
    assert code == 1
    assert yaml.safe_load(text)["depleted_at_s"] == pytest.approx(10_000 * 3600 / 2300)


def test_powersim_unknown_group(tmp_path):
    profile = tmp_path / "bad.yaml"
    profile.write_text("segments:\n  - {duration_s: 60, groups_on: [warp_drive]}\n")
    assert run("powersim", "--profile", str(profile))[0] == 2


def test_powersim_unknown_profile_name():
    assert run("powersim", "--profile", "no-such-profile")[0] == 2


# -- report --------------------------------------------------------------------------


def test_report_bundled_text():
    code, text = run("report", "--no-timestamp")
    assert code == 0
    for group in ("lidar_mid_range", "lidar_long_range", "lidar_4d", "camera"):
        assert group in text
    assert "## network" in text and "## power" in text
    assert "FAIL" not in text
    assert "generated" not in text
    assert "generated" in run("report")[1]


def test_report_failing_rig(rig_file):
    code, text = run("report", "--no-timestamp", rig_file(ONE_CAMERA))
    assert code == 1
    assert "## coverage  [FAILED]" in text
    assert "overall: FAIL" in text


def test_report_csv_is_stable():
    first = run("report", "--format", "csv")
    assert first[0] == 0
    assert first[1].splitlines()[0] == "section,item,metric,value"
    assert run("report", "--format", "csv") == first


# -- export-twin ---------------------------------------------------------------------


def test_export_twin(tmp_path):
    out = tmp_path / "twin.json"
    assert run("export-twin", "--out", str(out)) == (0, "")
    twin = json.loads(out.read_text())
    assert len(twin["sensors"]) == 25
    assert run("export-twin")[1] == out.read_text()


def test_export_twin_invalid_rig(rig_file):
    doc = yaml.safe_load(ONE_CAMERA)
    doc["sensors"][0]["max_range_m"] = 0
    assert run("export-twin", rig_file(yaml.safe_dump(doc)))[0] == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rigplan.cli", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "accepted: true" in proc.stdout
