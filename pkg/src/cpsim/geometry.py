"""Planar geometry used across the simulator.

Conventions: a single global 2D frame, positions in meters, headings in
degrees clockwise from north (+y). Heading 0 points along +y, heading 90
along +x.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

Vec2 = tuple[float, float]

_EPS = 1e-9


def add(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] + b[0], a[1] + b[1])


def sub(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] - b[0], a[1] - b[1])


def scale(a: Vec2, k: float) -> Vec2:
    return (a[0] * k, a[1] * k)


def dot(a: Vec2, b: Vec2) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: Vec2, b: Vec2) -> float:
    return a[0] * b[1] - a[1] * b[0]


def norm(a: Vec2) -> float:
    return math.hypot(a[0], a[1])


def dist(a: Vec2, b: Vec2) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def heading_unit(heading_deg: float) -> Vec2:
    """Unit vector for a compass heading (clockwise from north)."""
    r = math.radians(heading_deg)
    return (math.sin(r), math.cos(r))


def bearing_deg(origin: Vec2, target: Vec2) -> float:
    """Compass bearing from origin to target, in [0, 360)."""
    return math.degrees(math.atan2(target[0] - origin[0], target[1] - origin[1])) % 360.0


def norm_heading(h: float) -> float:
    return h % 360.0


def ang_diff_deg(a: float, b: float) -> float:
    """Smallest absolute angular difference between two headings, in [0, 180]."""
    d = (a - b) % 360.0
    return min(d, 360.0 - d)


def body_to_world(offset: Vec2, heading_deg: float) -> Vec2:
    """Rotate a body-frame offset (forward, left) into world coordinates."""
    fwd = heading_unit(heading_deg)
    left = (-fwd[1], fwd[0])
    return (offset[0] * fwd[0] + offset[1] * left[0], offset[0] * fwd[1] + offset[1] * left[1])


def in_sector(origin: Vec2, boresight_deg: float, range_m: float, aperture_deg: float, point: Vec2) -> bool:
    """Range-and-bearing test against a sensor sector. Boundaries are inclusive."""
    d = dist(origin, point)
    if d > range_m + _EPS:
        return False
    if aperture_deg >= 360.0 - _EPS or d <= _EPS:
        return True
    return ang_diff_deg(bearing_deg(origin, point), boresight_deg) <= aperture_deg / 2.0 + 1e-7


def rect_corners(center: Vec2, heading_deg: float, length: float, width: float) -> tuple[Vec2, Vec2, Vec2, Vec2]:
    """Corners of an oriented rectangle, length along the heading axis."""
    fwd = heading_unit(heading_deg)
    left = (-fwd[1], fwd[0])
    hl, hw = length / 2.0, width / 2.0
    fx, fy = fwd[0] * hl, fwd[1] * hl
    lx, ly = left[0] * hw, left[1] * hw
    cx, cy = center
    return (
        (cx + fx + lx, cy + fy + ly),
        (cx + fx - lx, cy + fy - ly),
        (cx - fx - lx, cy - fy - ly),
        (cx - fx + lx, cy - fy + ly),
    )


def point_in_rect(point: Vec2, corners: Sequence[Vec2]) -> bool:
    """Point containment for a convex quad given in winding order (inclusive)."""
    sign = 0.0
    n = len(corners)
    for i in range(n):
        a = corners[i]
        b = corners[(i + 1) % n]
        c = cross((b[0] - a[0], b[1] - a[1]), (point[0] - a[0], point[1] - a[1]))
        if abs(c) < _EPS:
            continue
        if sign == 0.0:
            sign = c
        elif c * sign < 0:
            return False
    return True


def _orient(a: Vec2, b: Vec2, c: Vec2) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool:
    return (
        min(a[0], b[0]) - _EPS <= p[0] <= max(a[0], b[0]) + _EPS
        and min(a[1], b[1]) - _EPS <= p[1] <= max(a[1], b[1]) + _EPS
    )


def segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool:
    """Closed-segment intersection test, collinear overlaps included."""
    q1x, q1y = q1
    q2x, q2y = q2
    p1x, p1y = p1
    p2x, p2y = p2
    qdx = q2x - q1x
    qdy = q2y - q1y
    pdx = p2x - p1x
    pdy = p2y - p1y
    d1 = qdx * (p1y - q1y) - qdy * (p1x - q1x)
    d2 = qdx * (p2y - q1y) - qdy * (p2x - q1x)
    d3 = pdx * (q1y - p1y) - pdy * (q1x - p1x)
    d4 = pdx * (q2y - p1y) - pdy * (q2x - p1x)
    if ((d1 > _EPS and d2 < -_EPS) or (d1 < -_EPS and d2 > _EPS)) and (
        (d3 > _EPS and d4 < -_EPS) or (d3 < -_EPS and d4 > _EPS)
    ):
        return True
    if abs(d1) <= _EPS and _on_segment(q1, q2, p1):
        return True
    if abs(d2) <= _EPS and _on_segment(q1, q2, p2):
        return True
    if abs(d3) <= _EPS and _on_segment(p1, p2, q1):
        return True
    if abs(d4) <= _EPS and _on_segment(p1, p2, q2):
        return True
    return False


def segment_rect_intersect(a: Vec2, b: Vec2, corners: Sequence[Vec2]) -> bool:
    """True if the segment touches or crosses the rectangle."""
    xs = [c[0] for c in corners]
    ys = [c[1] for c in corners]
    if max(a[0], b[0]) < min(xs) or min(a[0], b[0]) > max(xs):
        return False
    if max(a[1], b[1]) < min(ys) or min(a[1], b[1]) > max(ys):
        return False
    if point_in_rect(a, corners) or point_in_rect(b, corners):
        return True
    n = len(corners)
    for i in range(n):
        if segments_intersect(a, b, corners[i], corners[(i + 1) % n]):
            return True
    return False


def ray_segment_hit(origin: Vec2, direction: Vec2, a: Vec2, b: Vec2) -> Optional[float]:
    """Distance along the ray to segment ab, or None when the ray misses."""
    seg = (b[0] - a[0], b[1] - a[1])
    denom = cross(direction, seg)
    oa = (a[0] - origin[0], a[1] - origin[1])
    if abs(denom) < _EPS:
        # Parallel; only a collinear segment can be hit.
        if abs(cross(oa, direction)) > _EPS:
            return None
        t0 = dot(oa, direction)
        t1 = dot((b[0] - origin[0], b[1] - origin[1]), direction)
        lo, hi = min(t0, t1), max(t0, t1)
        if hi < -_EPS:
            return None
        return max(lo, 0.0)
    t = cross(oa, seg) / denom
    s = cross(oa, direction) / denom
    if t >= -_EPS and -_EPS <= s <= 1.0 + _EPS:
        return max(t, 0.0)
    return None


def ray_rect_hit(origin: Vec2, direction: Vec2, corners: Sequence[Vec2]) -> Optional[float]:
    """Nearest distance along the ray to the rectangle boundary, if any."""
    best: Optional[float] = None
    n = len(corners)
    for i in range(n):
        t = ray_segment_hit(origin, direction, corners[i], corners[(i + 1) % n])
        if t is not None and (best is None or t < best):
            best = t
    return best


def point_in_polygon(point: Vec2, polygon: Sequence[Vec2]) -> bool:
    """Even-odd containment test."""
    x, y = point
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xi > x:
                inside = not inside
    return inside


def point_segment_dist(p: Vec2, a: Vec2, b: Vec2) -> float:
    ab = (b[0] - a[0], b[1] - a[1])
    ap = (p[0] - a[0], p[1] - a[1])
    denom = dot(ab, ab)
    if denom < _EPS:
        return dist(p, a)
    t = max(0.0, min(1.0, dot(ap, ab) / denom))
    return dist(p, (a[0] + ab[0] * t, a[1] + ab[1] * t))


def point_polygon_boundary_dist(p: Vec2, polygon: Sequence[Vec2]) -> float:
    n = len(polygon)
    return min(point_segment_dist(p, polygon[i], polygon[(i + 1) % n]) for i in range(n))


def point_rect_dist(p: Vec2, corners: Sequence[Vec2]) -> float:
    """Distance from a point to a rectangle; zero when inside."""
    if point_in_rect(p, corners):
        return 0.0
    n = len(corners)
    return min(point_segment_dist(p, corners[i], corners[(i + 1) % n]) for i in range(n))


def polygon_is_simple(polygon: Sequence[Vec2]) -> bool:
    """True for a non-self-intersecting polygon with no degenerate edges.

    Edges are prefiltered by bounding box along x before the exact pairwise
    test, which keeps fan-shaped polygons with hundreds of vertices cheap.
    """
    n = len(polygon)
    if n < 3:
        return False
    for i in range(n):
        if dist(polygon[i], polygon[(i + 1) % n]) < 1e-6:
            return False
    edges = []
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        xmin, xmax = (a[0], b[0]) if a[0] <= b[0] else (b[0], a[0])
        ymin, ymax = (a[1], b[1]) if a[1] <= b[1] else (b[1], a[1])
        edges.append((xmin, xmax, ymin, ymax, i, a, b))
    edges.sort()
    for idx in range(n):
        xmin, xmax, ymin, ymax, i, a1, a2 = edges[idx]
        for jdx in range(idx + 1, n):
            bxmin, bxmax, bymin, bymax, j, b1, b2 = edges[jdx]
            if bxmin > xmax:
                break
            if bymin > ymax or bymax < ymin:
                continue
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if segments_intersect(a1, a2, b1, b2):
                return False
    return True


def extrapolate(position: Vec2, speed: float, heading_deg: float, dt_ms: float) -> Vec2:
    """Constant-velocity position prediction over a signed millisecond interval."""
    d = speed * dt_ms / 1000.0
    if d == 0.0:
        return position
    u = heading_unit(heading_deg)
    return (position[0] + u[0] * d, position[1] + u[1] * d)


def centroid(points: Iterable[Vec2]) -> Vec2:
    pts = list(points)
    return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))
