"""Ground-level coverage, blind spots, redundancy and parallax for sensor groups.

Sensors are ideal point apertures with rectangular angular frusta; the
vehicle body is a set of oriented boxes. Every cell of a coverage grid is
independent, so grids can be computed in row chunks on several threads with
bit-identical results.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import SELF_OCCLUSION_TOL, OrientedBox, RigSpec, Sensor

# Closed angular intervals, widened by this much so that points constructed
# to sit exactly on a FOV edge are inside despite rounding in atan2.
ANGLE_EPS = 1e-12

DEFAULT_HEIGHTS = (0.5, 1.0)
DEFAULT_EXTENT = 30.0
DEFAULT_CELL = 0.1


def _local_coords(sensor: Sensor, points: np.ndarray):
    """Sensor-frame coordinates of ``points`` (N, 3), computed entry by entry."""
    r = sensor.rotation
    ox, oy, oz = sensor.position_m
    dx = points[:, 0] - ox
    dy = points[:, 1] - oy
    dz = points[:, 2] - oz
    lx = r[0, 0] * dx + r[1, 0] * dy + r[2, 0] * dz
    ly = r[0, 1] * dx + r[1, 1] * dy + r[2, 1] * dz
    lz = r[0, 2] * dx + r[1, 2] * dy + r[2, 2] * dz
    return dx, dy, dz, lx, ly, lz


def frustum_mask(sensor: Sensor, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`frustum_contains` over an (N, 3) array."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if not sensor.has_frustum:
        return np.zeros(len(points), dtype=bool)
    dx, dy, dz, lx, ly, lz = _local_coords(sensor, points)
    inside = np.sqrt(dx * dx + dy * dy + dz * dz) <= sensor.max_range_m
    if not sensor.spinning:
        az = np.arctan2(ly, lx)
        inside &= np.abs(az) <= sensor.azimuth_fov / 2 + ANGLE_EPS
    el = np.arctan2(lz, np.hypot(lx, ly))
    inside &= np.abs(el) <= sensor.elevation_fov / 2 + ANGLE_EPS
    return inside


def frustum_contains(sensor: Sensor, point: Sequence[float]) -> bool:
    """True iff ``point`` is within range and inside the sensor's angular frustum.

    Sensors with a 360 degree azimuth FOV only get the range and elevation tests.
    """
    return bool(frustum_mask(sensor, np.asarray(point, dtype=float)[None, :])[0])


def segment_blocked(origin: np.ndarray, targets: np.ndarray, box: OrientedBox) -> np.ndarray:
    """For each target, whether the open segment from ``origin`` crosses ``box``.

    Slab test in the box frame. The parameter interval where the line is
    inside the closed box must overlap (0, 1) with positive length, so
    segments that only touch the box at an endpoint, or graze an edge at a
    single point, are not blocked.
    """
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    cx, cy, cz = box.center
    ox, oy, oz = origin[0] - cx, origin[1] - cy, origin[2] - cz
    o_local = (c * ox + s * oy, -s * ox + c * oy, oz)
    tx = targets[:, 0] - cx
    ty = targets[:, 1] - cy
    tz = targets[:, 2] - cz
    t_local = (c * tx + s * ty, -s * tx + c * ty, tz)
    n = len(targets)
    t_enter = np.zeros(n)
    t_exit = np.ones(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis in range(3):
            h = box.half_extents[axis]
            o = o_local[axis]
            d = t_local[axis] - o
            parallel = d == 0
            t1 = (-h - o) / d
            t2 = (h - o) / d
            lo = np.minimum(t1, t2)
            hi = np.maximum(t1, t2)
            if -h <= o <= h:
                lo = np.where(parallel, -np.inf, lo)
                hi = np.where(parallel, np.inf, hi)
            else:
                lo = np.where(parallel, np.inf, lo)
                hi = np.where(parallel, -np.inf, hi)
            t_enter = np.maximum(t_enter, lo)
            t_exit = np.minimum(t_exit, hi)
    return t_enter < t_exit


def occluded(origin: Sequence[float], target: Sequence[float], occluders: Iterable[OrientedBox]) -> bool:
    """True iff the open segment origin -> target intersects any occluder box."""
    origin = np.asarray(origin, dtype=float)
    target = np.asarray(target, dtype=float)[None, :]
    return any(bool(segment_blocked(origin, target, box)[0]) for box in occluders)


def occluders_for(sensor: Sensor, occluders: Iterable[OrientedBox]) -> list[OrientedBox]:
    """Occluders that can block this sensor; boxes it is mounted on or in are skipped."""
    return [b for b in occluders if not b.contains(sensor.position_m, tol=SELF_OCCLUSION_TOL)]


def coverage_mask(sensor: Sensor, points: np.ndarray, occluders: Sequence[OrientedBox]) -> np.ndarray:
    """Points inside the sensor frustum with an unobstructed line of sight."""
    mask = frustum_mask(sensor, points)
    origin = np.asarray(sensor.position_m, dtype=float)
    for box in occluders_for(sensor, occluders):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            break
        mask[idx[segment_blocked(origin, points[idx], box)]] = False
    return mask


def footprint_mask(xy: np.ndarray, occluders: Iterable[OrientedBox]) -> np.ndarray:
    """Points (N, 2) whose ground projection lies inside any occluder footprint."""
    out = np.zeros(len(xy), dtype=bool)
    for box in occluders:
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        dx = xy[:, 0] - box.center[0]
        dy = xy[:, 1] - box.center[1]
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        out |= (np.abs(lx) <= box.half_extents[0]) & (np.abs(ly) <= box.half_extents[1])
    return out


# -- grids ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoverageGrid:
    """Horizontal grid of covering-sensor sets at one query height.

    ``covers[j, i, s]`` says whether sensor ``sensor_ids[s]`` covers the
    cell in row ``j`` (y) and column ``i`` (x). Cell centers are symmetric
    about the vehicle origin.
    """

    cell_size: float
    width: int
    height: int
    query_height: float
    sensor_ids: tuple[str, ...]
    covers: np.ndarray
    interior: np.ndarray

    @property
    def origin(self) -> tuple[float, float]:
        """Lower-left corner of the grid in vehicle coordinates."""
        return (-self.width / 2 * self.cell_size, -self.height / 2 * self.cell_size)

    @property
    def extent(self) -> float:
        return min(self.width, self.height) / 2 * self.cell_size

    @property
    def xs(self) -> np.ndarray:
        return cell_centers(self.width, self.cell_size)

    @property
    def ys(self) -> np.ndarray:
        return cell_centers(self.height, self.cell_size)

    @property
    def k(self) -> np.ndarray:
        return self.covers.sum(axis=2)

    def sensors_at(self, row: int, col: int) -> tuple[str, ...]:
        return tuple(sid for sid, on in zip(self.sensor_ids, self.covers[row, col]) if on)

    def __eq__(self, other):
        if not isinstance(other, CoverageGrid):
            return NotImplemented
        return (
            self.cell_size == other.cell_size
            and self.width == other.width
            and self.height == other.height
            and self.query_height == other.query_height
            and self.sensor_ids == other.sensor_ids
            and np.array_equal(self.covers, other.covers)
            and np.array_equal(self.interior, other.interior)
        )


def cell_centers(n: int, cell_size: float) -> np.ndarray:
    # (i - (n-1)/2) * cell keeps mirrored centers exact negations of each other
    return (np.arange(n) - (n - 1) / 2) * cell_size


def coverage_grid(
    rig: RigSpec,
    group: str | Iterable[str],
    query_height: float = 1.0,
    extent: float = DEFAULT_EXTENT,
    cell_size: float = DEFAULT_CELL,
    threads: int = 1,
) -> CoverageGrid:
    """Coverage grid for one modality group.

    ``extent`` is the half-width of the square grid around the vehicle
    origin. A cell's sensor set holds every sensor of the group whose
    frustum contains the cell center at ``query_height`` with a clear line
    of sight past the vehicle occluders.
    """
    if not (extent > cell_size > 0):
        raise ValueError("need extent > cell_size > 0")
    n = int(math.ceil(2 * extent / cell_size - 1e-9))
    sensors = rig.group(group)
    xs = cell_centers(n, cell_size)
    ys = cell_centers(n, cell_size)
    occluders = rig.vehicle.occluders
    covers = np.zeros((n, n, len(sensors)), dtype=bool)
    interior = np.zeros((n, n), dtype=bool)

    def fill(rows: range) -> None:
        gx, gy = np.meshgrid(xs, ys[rows.start:rows.stop])
        pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(query_height))])
        shape = (len(rows), n)
        interior[rows.start:rows.stop] = footprint_mask(pts[:, :2], occluders).reshape(shape)
        for k, sensor in enumerate(sensors):
            covers[rows.start:rows.stop, :, k] = coverage_mask(sensor, pts, occluders).reshape(shape)

    chunk = max(1, math.ceil(n / max(1, threads)))
    chunks = [range(i, min(n, i + chunk)) for i in range(0, n, chunk)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, chunks))
    else:
        for rows in chunks:
            fill(rows)
    return CoverageGrid(
        cell_size=float(cell_size),
        width=n,
        height=n,
        query_height=float(query_height),
        sensor_ids=tuple(s.id for s in sensors),
        covers=covers,
        interior=interior,
    )


# -- azimuth sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class AzimuthalCoverage:
    fraction: float
    gaps: tuple[tuple[float, float], ...]  # [start, stop) in radians, stop may exceed 2*pi on wrap
    samples: int
    step: float

    @property
    def complete(self) -> bool:
        return not self.gaps

    @property
    def gap_total(self) -> float:
        return sum(b - a for a, b in self.gaps)


def azimuthal_coverage(
    rig: RigSpec,
    group: str | Iterable[str],
    radius: float = 10.0,
    query_height: float = 1.0,
    step: float = math.radians(0.5),
) -> AzimuthalCoverage:
    """Fraction of a horizontal circle around the vehicle origin seen by the group.

    Samples sit at azimuths ``k * step``. Gaps are maximal runs of unseen
    samples, each reported as the half-open interval the run spans.
    """
    if radius <= 0 or step <= 0:
        raise ValueError("radius and step must be positive")
    n = int(math.ceil(2 * math.pi / step - 1e-9))
    theta = np.arange(n) * step
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), np.full(n, float(query_height))])
    seen = np.zeros(n, dtype=bool)
    for sensor in rig.group(group):
        seen |= coverage_mask(sensor, pts, rig.vehicle.occluders)
    return AzimuthalCoverage(float(seen.mean()), _gap_runs(seen, step), n, step)


def _gap_runs(seen: np.ndarray, step: float) -> tuple[tuple[float, float], ...]:
    n = len(seen)
    if seen.all():
        return ()
    if not seen.any():
        return ((0.0, n * step),)
    runs = []
    i = 0
    while i < n:
        if seen[i]:
            i += 1
            continue
        j = i
        while j < n and not seen[j]:
            j += 1
        runs.append([i, j])
        i = j
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == n:
        first = runs.pop(0)
        runs[-1][1] = n + first[1]
    return tuple((a * step, b * step) for a, b in runs)


# -- blind-spot accounting -------------------------------------------------------


def _quadrant_area(x: np.ndarray, y: np.ndarray, r: float) -> np.ndarray:
    """Area of the disc of radius ``r`` inside [0, x] x [0, y], signed by the signs of x and y."""
    sx, sy = np.sign(x), np.sign(y)
    ax = np.minimum(np.abs(x), r)
    ay = np.minimum(np.abs(y), r)
    # below u_star the disc boundary lies above y, so the strip height is just y
    u_star = np.sqrt(np.maximum(r * r - ay * ay, 0.0))
    u0 = np.minimum(ax, u_star)

    def prim(t):
        t = np.minimum(t, r)
        return 0.5 * (t * np.sqrt(np.maximum(r * r - t * t, 0.0)) + r * r * np.arcsin(t / r))

    area = ay * u0 + prim(ax) - prim(u0)
    return sx * sy * area


def rect_disc_area(x0, x1, y0, y1, r: float) -> np.ndarray:
    """Exact area of the axis-aligned rectangles [x0, x1] x [y0, y1] inside the origin-centered disc."""
    x0, x1, y0, y1 = (np.asarray(v, dtype=float) for v in (x0, x1, y0, y1))
    return (
        _quadrant_area(x1, y1, r)
        - _quadrant_area(x0, y1, r)
        - _quadrant_area(x1, y0, r)
        + _quadrant_area(x0, y0, r)
    )


@dataclass(frozen=True)
class CoverageSummary:
    radius: float
    covered_area: float
    blind_area: float
    interior_area: float
    k_histogram: tuple[int, ...]
    in_radius_cells: int

    def as_dict(self) -> dict:
        return {
            "radius_m": self.radius,
            "covered_area_m2": self.covered_area,
            "blind_area_m2": self.blind_area,
            "interior_area_m2": self.interior_area,
            "in_radius_cells": self.in_radius_cells,
            "k_histogram": list(self.k_histogram),
        }


def cell_disc_areas(grid: CoverageGrid, radius: float) -> np.ndarray:
    """Per-cell area clipped to the analysis disc, shape (height, width)."""
    h = grid.cell_size / 2
    xs, ys = grid.xs, grid.ys
    gx, gy = np.meshgrid(xs, ys)
    return rect_disc_area(gx - h, gx + h, gy - h, gy + h, radius)


def blind_spot_area(grid: CoverageGrid, radius: float) -> CoverageSummary:
    """Covered and blind area inside the disc of ``radius`` around the vehicle origin.

    Cells are clipped to the disc, so covered + blind + interior equals the
    disc area whenever the disc fits in the grid. A cell counts as in-radius
    when any part of it lies inside the disc; vehicle-interior cells are
    reported separately and left out of the histogram.
    """
    areas = cell_disc_areas(grid, radius)
    in_radius = areas > 0
    k = grid.k
    outside = in_radius & ~grid.interior
    covered = outside & (k > 0)
    blind = outside & (k == 0)
    hist = np.bincount(k[outside].ravel(), minlength=len(grid.sensor_ids) + 1)
    return CoverageSummary(
        radius=float(radius),
        covered_area=float(areas[covered].sum()),
        blind_area=float(areas[blind].sum()),
        interior_area=float(areas[in_radius & grid.interior].sum()),
        k_histogram=tuple(int(v) for v in hist),
        in_radius_cells=int(outside.sum()),
    )


# -- parallax and projection -----------------------------------------------------


def _position(x) -> np.ndarray:
    return np.asarray(x.position_m if isinstance(x, Sensor) else x, dtype=float)


def parallax_angle(a: Sensor | Sequence[float], b: Sensor | Sequence[float], target: Sequence[float]) -> float:
    """Angle at ``target`` subtended by the two sensor origins, in radians."""
    t = np.asarray(target, dtype=float)
    u = _position(a) - t
    v = _position(b) - t
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("target coincides with a sensor origin")
    # atan2 keeps small and near-pi angles accurate where acos does not
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))


def _intrinsics(camera: Sensor):
    if camera.modality != "camera":
        raise ValueError(f"{camera.id} is not a camera")
    w, h = camera.resolution
    fx = (w / 2) / math.tan(camera.azimuth_fov / 2)
    fy = (h / 2) / math.tan(camera.elevation_fov / 2)
    return fx, fy, w / 2, h / 2


def project_point(camera: Sensor, point: Sequence[float]) -> tuple[float, float] | None:
    """Pinhole projection to pixel (u, v); ``None`` when the point is outside the frustum.

    u grows to the right of the image (toward -y in the camera frame), v
    grows downward.
    """
    fx, fy, cx, cy = _intrinsics(camera)
    p = np.asarray(point, dtype=float)[None, :]
    _, _, _, lx, ly, lz = _local_coords(camera, p)
    depth = float(lx[0])
    if depth <= 0 or not frustum_mask(camera, p)[0]:
        return None
    return cx - fx * float(ly[0]) / depth, cy - fy * float(lz[0]) / depth


def unproject_pixel(camera: Sensor, u: float, v: float, depth: float) -> np.ndarray:
    """Vehicle-frame point at optical-axis ``depth`` that projects to (u, v)."""
    fx, fy, cx, cy = _intrinsics(camera)
    local = np.array([depth, (cx - u) * depth / fx, (cy - v) * depth / fy])
    return camera.rotation @ local + np.asarray(camera.position_m, dtype=float)


# -- export ------------------------------------------------------------------------


def grid_pgm(grid: CoverageGrid) -> bytes:
    """Binary graymap, one byte per cell holding min(k, 255); top row is +y."""
    k = np.minimum(grid.k, 255).astype(np.uint8)[::-1]
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + k.tobytes()


def grid_csv(grid: CoverageGrid) -> str:
    buf = io.StringIO()
    buf.write("x_m,y_m,k,interior,sensors\n")
    xs, ys = grid.xs, grid.ys
    k = grid.k
    for j in range(grid.height):
        for i in range(grid.width):
            ids = ";".join(grid.sensors_at(j, i)) if k[j, i] else ""
            buf.write(f"{xs[i]:.6f},{ys[j]:.6f},{k[j, i]},{int(grid.interior[j, i])},{ids}\n")
    return buf.getvalue()
