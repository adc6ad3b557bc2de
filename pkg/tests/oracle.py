"""Brute-force reference for the coverage predicates, one cell at a time.

Written independently of ``rigplan.coverage``: plain ``math``, sequential
inverse rotations instead of a rotation matrix, and a Liang-Barsky clip per
occluder. Shares only the predicate definitions (closed angular intervals
widened by 1e-12, open segments, 1 cm self-occlusion tolerance).
"""

import math

EPS = 1e-12
SELF_TOL = 0.01


def to_sensor_frame(sensor, p):
    x = p[0] - sensor.position_m[0]
    y = p[1] - sensor.position_m[1]
    z = p[2] - sensor.position_m[2]
    # undo yaw (about z), then pitch (about y), then roll (about x)
    a = math.radians(sensor.yaw_deg)
    x, y = math.cos(a) * x + math.sin(a) * y, -math.sin(a) * x + math.cos(a) * y
    b = math.radians(sensor.pitch_deg)
    x, z = math.cos(b) * x - math.sin(b) * z, math.sin(b) * x + math.cos(b) * z
    c = math.radians(sensor.roll_deg)
    y, z = math.cos(c) * y + math.sin(c) * z, -math.sin(c) * y + math.cos(c) * z
    return x, y, z


def in_frustum(sensor, p):
    dist = math.sqrt(sum((p[i] - sensor.position_m[i]) ** 2 for i in range(3)))
    if dist > sensor.max_range_m:
        return False
    x, y, z = to_sensor_frame(sensor, p)
    if sensor.azimuth_fov_deg < 360.0:
        if abs(math.atan2(y, x)) > math.radians(sensor.azimuth_fov_deg) / 2 + EPS:
            return False
    return abs(math.atan2(z, math.hypot(x, y))) <= math.radians(sensor.elevation_fov_deg) / 2 + EPS


def _to_box(box, p):
    a = math.radians(box.yaw_deg)
    dx, dy, dz = p[0] - box.center[0], p[1] - box.center[1], p[2] - box.center[2]
    return (math.cos(a) * dx + math.sin(a) * dy, -math.sin(a) * dx + math.cos(a) * dy, dz)


def in_box(box, p, tol=0.0):
    q = _to_box(box, p)
    return all(abs(q[i]) <= box.half_extents[i] + tol for i in range(3))


def segment_hits_box(origin, target, box):
    o = _to_box(box, origin)
    t = _to_box(box, target)
    lo, hi = 0.0, 1.0
    for i in range(3):
        h = box.half_extents[i]
        d = t[i] - o[i]
        if d == 0:
            if o[i] < -h or o[i] > h:
                return False
            continue
        t1, t2 = (-h - o[i]) / d, (h - o[i]) / d
        if t1 > t2:
            t1, t2 = t2, t1
        lo, hi = max(lo, t1), min(hi, t2)
        if lo >= hi:
            return False
    return lo < hi


def covers(sensor, p, occluders):
    if not in_frustum(sensor, p):
        return False
    for box in occluders:
        if in_box(box, sensor.position_m, SELF_TOL):
            continue
        if segment_hits_box(sensor.position_m, p, box):
            return False
    return True


def grid_sets(sensors, occluders, n, cell, height):
    """Per-cell tuples of covering sensor ids plus the interior flags, rows = y."""
    centers = [(i - (n - 1) / 2) * cell for i in range(n)]
    sets, interior = [], []
    for y in centers:
        row_sets, row_int = [], []
        for x in centers:
            p = (x, y, height)
            row_sets.append(tuple(s.id for s in sensors if covers(s, p, occluders)))
            row_int.append(any(
                abs(_to_box(b, (x, y, b.center[2]))[0]) <= b.half_extents[0]
                and abs(_to_box(b, (x, y, b.center[2]))[1]) <= b.half_extents[1]
                for b in occluders
            ))
        sets.append(row_sets)
        interior.append(row_int)
    return sets, interior
