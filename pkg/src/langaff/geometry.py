"""2D polygon and point-set geometry.

All functions work in a right-handed math frame (x right, y up). Callers that
live in image coordinates (row down) negate the row axis before calling; the
actions module wraps this so angle conventions stay consistent everywhere.
"""

from __future__ import annotations

import math

import numpy as np


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain. Returns hull vertices in CCW order.

    Accepts an (N, 2) array; collinear points on hull edges are dropped.
    Degenerate inputs (single point, collinear set) return the reduced hull.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts
    # unique() sorts lexicographically already
    def half(iterable):
        chain: list[np.ndarray] = []
        for p in iterable:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.array(hull)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def min_area_rect(points: np.ndarray) -> tuple[np.ndarray, float, float, float]:
    """Minimum-area rectangle enclosing a point set.

    Returns (center_xy, long_side, short_side, long_axis_angle_deg) with the
    angle of the long axis wrapped into (-90, 90]. The optimum rectangle has
    an edge collinear with a hull edge, so enumerating hull edges is exact.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("empty point set")
    hull = convex_hull(pts)
    if len(hull) == 1:
        return hull[0].copy(), 0.0, 0.0, 0.0
    if len(hull) == 2:
        d = hull[1] - hull[0]
        ang = _wrap_half(math.degrees(math.atan2(d[1], d[0])))
        return (hull[0] + hull[1]) / 2.0, float(np.hypot(*d)), 0.0, ang

    best = None
    for i in range(len(hull)):
        edge = hull[(i + 1) % len(hull)] - hull[i]
        theta = math.atan2(edge[1], edge[0])
        c, s = math.cos(-theta), math.sin(-theta)
        rot = np.array([[c, -s], [s, c]])
        proj = hull @ rot.T
        mins, maxs = proj.min(axis=0), proj.max(axis=0)
        extents = maxs - mins
        area = extents[0] * extents[1]
        if best is None or area < best[0] - 1e-12:
            center_rot = (mins + maxs) / 2.0
            inv = np.array([[c, s], [-s, c]])
            center = center_rot @ inv.T
            best = (area, center, float(extents[0]), float(extents[1]), theta)

    _, center, ext_along, ext_across, theta = best
    if ext_along >= ext_across:
        long_side, short_side = ext_along, ext_across
        ang = math.degrees(theta)
    else:
        long_side, short_side = ext_across, ext_along
        ang = math.degrees(theta) + 90.0
    return center, long_side, short_side, _wrap_half(ang)


def _wrap_half(angle_deg: float) -> float:
    """Wrap an axis angle into (-90, 90]; axes are 180-degree periodic."""
    a = angle_deg % 180.0
    if a > 90.0:
        a -= 180.0
    if a == -90.0:
        a = 90.0
    return a


def wrap_axis_angle(angle_deg: float) -> float:
    return _wrap_half(angle_deg)


def axis_angle_difference(a_deg: float, b_deg: float) -> float:
    """Smallest absolute difference between two 180-periodic axis angles."""
    d = abs(a_deg - b_deg) % 180.0
    return min(d, 180.0 - d)


def point_in_polygon(point: np.ndarray, polygon: np.ndarray) -> bool:
    """Even-odd rule; boundary points count as inside (within 1e-12)."""
    x, y = float(point[0]), float(point[1])
    poly = np.asarray(polygon, dtype=np.float64)
    n = len(poly)
    inside = False
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        # on-segment check
        if _on_segment(x, y, x0, y0, x1, y1):
            return True
        if (y0 > y) != (y1 > y):
            x_cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < x_cross:
                inside = not inside
    return inside


def _on_segment(x, y, x0, y0, x1, y1, tol=1e-12) -> bool:
    length_sq = (x1 - x0) ** 2 + (y1 - y0) ** 2
    if length_sq < tol * tol:
        # degenerate segment: containment means coinciding with the vertex
        return abs(x - x0) <= tol and abs(y - y0) <= tol
    cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
    if abs(cross) > tol * max(1.0, abs(x1 - x0) + abs(y1 - y0)):
        return False
    dot = (x - x0) * (x1 - x0) + (y - y0) * (y1 - y0)
    return -tol <= dot <= length_sq + tol


def polygon_area(polygon: np.ndarray) -> float:
    """Shoelace area; positive for CCW vertex order."""
    poly = np.asarray(polygon, dtype=np.float64)
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_centroid(polygon: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon."""
    poly = np.asarray(polygon, dtype=np.float64)
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    if abs(area) < 1e-15:
        return poly.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def ray_segment_entry(
    origin: np.ndarray, direction: np.ndarray, polygon: np.ndarray
) -> float | None:
    """Distance along a unit ray to where it first enters a polygon.

    Returns 0.0 when the origin is already inside, the entry parameter t >= 0
    when the ray crosses the boundary, or None when it never touches.
    """
    if point_in_polygon(origin, polygon):
        return 0.0
    poly = np.asarray(polygon, dtype=np.float64)
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    best: float | None = None
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        e = b - a
        denom = d[0] * e[1] - d[1] * e[0]
        if abs(denom) < 1e-15:
            continue
        diff = a - o
        t = (diff[0] * e[1] - diff[1] * e[0]) / denom
        u = (diff[0] * d[1] - diff[1] * d[0]) / denom
        if t >= 0.0 and -1e-12 <= u <= 1.0 + 1e-12:
            if best is None or t < best:
                best = t
    return best


def transform_polygon(
    polygon: np.ndarray, xy: tuple[float, float], yaw_rad: float
) -> np.ndarray:
    """Rotate by yaw (CCW) then translate."""
    poly = np.asarray(polygon, dtype=np.float64)
    c, s = math.cos(yaw_rad), math.sin(yaw_rad)
    rot = np.array([[c, -s], [s, c]])
    return poly @ rot.T + np.asarray(xy, dtype=np.float64)


def scale_polygon_about_centroid(polygon: np.ndarray, factor: float) -> np.ndarray:
    center = polygon_centroid(polygon)
    return (np.asarray(polygon, dtype=np.float64) - center) * factor + center


def clip_convex_to_halfplane(
    polygon: np.ndarray, normal: tuple[float, float], offset: float
) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to normal . p >= offset."""
    poly = np.asarray(polygon, dtype=np.float64)
    nx, ny = normal
    out: list[np.ndarray] = []

    def push(p):
        if not out or np.abs(out[-1] - p).max() > 1e-12:
            out.append(p)

    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        da = nx * a[0] + ny * a[1] - offset
        db = nx * b[0] + ny * b[1] - offset
        if da >= 0:
            push(a)
        if (da > 0) != (db > 0) and da != db:
            t = da / (da - db)
            push(a + t * (b - a))
    if len(out) > 1 and np.abs(out[0] - out[-1]).max() <= 1e-12:
        out.pop()
    return np.array(out) if out else np.zeros((0, 2))


def clip_convex_to_band(polygon: np.ndarray, x_lo: float, x_hi: float) -> np.ndarray:
    """Intersect a convex polygon with the vertical band x in [x_lo, x_hi]."""
    clipped = clip_convex_to_halfplane(polygon, (1.0, 0.0), x_lo)
    if len(clipped) == 0:
        return clipped
    return clip_convex_to_halfplane(clipped, (-1.0, 0.0), -x_hi)


def rasterize_polygon(
    polygon_rc: np.ndarray, height: int, width: int
) -> np.ndarray:
    """Fill a polygon given in (row, col) vertex coordinates.

    A pixel is foreground when its center lies inside the polygon. Scanline
    with even-odd rule; vectorized over columns per row.
    """
    poly = np.asarray(polygon_rc, dtype=np.float64)
    out = np.zeros((height, width), dtype=bool)
    if len(poly) < 3:
        return out
    r_min = max(0, int(math.floor(poly[:, 0].min())))
    r_max = min(height - 1, int(math.ceil(poly[:, 0].max())))
    rows_v = poly[:, 0]
    cols_v = poly[:, 1]
    n = len(poly)
    for r in range(r_min, r_max + 1):
        y = float(r)
        crossings = []
        for i in range(n):
            y0, y1 = rows_v[i], rows_v[(i + 1) % n]
            if (y0 > y) != (y1 > y):
                x0, x1 = cols_v[i], cols_v[(i + 1) % n]
                crossings.append(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
        crossings.sort()
        for j in range(0, len(crossings) - 1, 2):
            c_lo = max(0, int(math.ceil(crossings[j])))
            c_hi = min(width - 1, int(math.floor(crossings[j + 1])))
            if c_hi >= c_lo:
                out[r, c_lo : c_hi + 1] = True
    return out
