"""Constraint regions: half-planes, disks and simple polygons.

A region describes the open set U in which a prescribed fraction of the
spectral mass is forced to live.  Every variant supports containment,
exact signed distance, boundary discretization with outward normals, and
the circular-law mass of the region (area of the intersection with the
unit disk divided by pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")

    @property
    def as_complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class BoundarySample:
    """One element of a discretized region boundary.

    ``arc_weight`` is the length of boundary represented by the sample and
    ``outward_normal`` is the unit normal pointing out of the region.
    """

    position: Point
    arc_weight: float
    outward_normal: tuple

    def __post_init__(self):
        if self.arc_weight <= 0:
            raise ValueError("arc_weight must be positive")


def _as_xy(pt) -> tuple:
    if isinstance(pt, Point):
        return pt.x, pt.y
    if isinstance(pt, complex):
        return pt.real, pt.imag
    x, y = pt
    return float(x), float(y)


@dataclass(frozen=True)
class HalfPlane:
    """The open half-plane U = {z : Re z < -a}."""

    a: float

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError("half-plane offset must be finite")


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def __post_init__(self):
        cx, cy = _as_xy(self.center)
        object.__setattr__(self, "center", (float(cx), float(cy)))
        if self.radius <= 0:
            raise ValueError("disk radius must be strictly positive")


@dataclass(frozen=True)
class Polygon:
    """Closed, non-self-intersecting polygon; orientation is normalized
    to counter-clockwise (positive signed area)."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        area = _signed_area(verts)
        if abs(area) < 1e-14:
            raise ValueError("polygon has zero area")
        if area < 0:
            verts = verts[::-1]
        if _self_intersects(verts):
            raise ValueError("polygon must not self-intersect")
        object.__setattr__(self, "vertices", verts)

    @property
    def edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


Region = Union[HalfPlane, Disk, Polygon]


def _signed_area(verts) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _segments_intersect(p, q, r, s) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-14 else (1 if v > 0 else -1)

    return (orient(p, q, r) != orient(p, q, s)
            and orient(r, s, p) != orient(r, s, q))


def _self_intersects(verts) -> bool:
    n = len(verts)
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return True
    return False


# ---------------------------------------------------------------------------
# containment and signed distance
# ---------------------------------------------------------------------------

def contains(region: Region, pt) -> bool:
    """True iff ``pt`` lies in the open set U (boundary excluded)."""
    return signed_distance(region, pt) < 0.0


def signed_distance(region: Region, pt) -> float:
    """Signed distance to the region boundary: negative inside U,
    positive outside, zero on the boundary.  Exact for all variants."""
    x, y = _as_xy(pt)
    if isinstance(region, HalfPlane):
        return x + region.a
    if isinstance(region, Disk):
        cx, cy = region.center
        return math.hypot(x - cx, y - cy) - region.radius
    if isinstance(region, Polygon):
        d = _polygon_distance(region, x, y)
        return -d if _winding_inside(region, x, y) else d
    raise TypeError(f"unknown region type {type(region)!r}")


def signed_distance_grid(region: Region, X, Y):
    """Vectorized :func:`signed_distance` over coordinate arrays."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if isinstance(region, HalfPlane):
        return X + region.a
    if isinstance(region, Disk):
        cx, cy = region.center
        return np.hypot(X - cx, Y - cy) - region.radius
    if isinstance(region, Polygon):
        dist = np.full(X.shape, np.inf)
        wind = np.zeros(X.shape)
        for (x0, y0), (x1, y1) in region.edges:
            ex, ey = x1 - x0, y1 - y0
            ln2 = ex * ex + ey * ey
            t = np.clip(((X - x0) * ex + (Y - y0) * ey) / ln2, 0.0, 1.0)
            px, py = x0 + t * ex, y0 + t * ey
            dist = np.minimum(dist, np.hypot(X - px, Y - py))
            wind += np.arctan2((x0 - X) * (y1 - Y) - (x1 - X) * (y0 - Y),
                               (x0 - X) * (x1 - X) + (y0 - Y) * (y1 - Y))
        inside = np.abs(wind) > math.pi
        return np.where(inside, -dist, dist)
    raise TypeError(f"unknown region type {type(region)!r}")


def _winding_inside(poly: Polygon, x, y) -> bool:
    total = 0.0
    for (x0, y0), (x1, y1) in poly.edges:
        total += math.atan2((x0 - x) * (y1 - y) - (x1 - x) * (y0 - y),
                            (x0 - x) * (x1 - x) + (y0 - y) * (y1 - y))
    return abs(total) > math.pi


def _polygon_distance(poly: Polygon, x, y) -> float:
    best = math.inf
    for (x0, y0), (x1, y1) in poly.edges:
        ex, ey = x1 - x0, y1 - y0
        t = ((x - x0) * ex + (y - y0) * ey) / (ex * ex + ey * ey)
        t = min(1.0, max(0.0, t))
        best = min(best, math.hypot(x - x0 - t * ex, y - y0 - t * ey))
    return best


def sd_gradient(region: Region, pt) -> tuple:
    """Unit gradient of the signed distance (points out of U)."""
    x, y = _as_xy(pt)
    if isinstance(region, HalfPlane):
        return (1.0, 0.0)
    if isinstance(region, Disk):
        cx, cy = region.center
        dx, dy = x - cx, y - cy
        r = math.hypot(dx, dy)
        if r < 1e-12:
            return (1.0, 0.0)
        return (dx / r, dy / r)
    if isinstance(region, Polygon):
        qx, qy = _polygon_nearest_point(region, x, y)
        dx, dy = x - qx, y - qy
        r = math.hypot(dx, dy)
        if r < 1e-12:
            nx, ny = _polygon_edge_normal_near(region, x, y)
            return (nx, ny)
        if _winding_inside(region, x, y):
            return (-dx / r, -dy / r)
        return (dx / r, dy / r)
    raise TypeError(f"unknown region type {type(region)!r}")


def _polygon_nearest_point(poly: Polygon, x, y) -> tuple:
    best, bq = math.inf, (x, y)
    for (x0, y0), (x1, y1) in poly.edges:
        ex, ey = x1 - x0, y1 - y0
        t = ((x - x0) * ex + (y - y0) * ey) / (ex * ex + ey * ey)
        t = min(1.0, max(0.0, t))
        qx, qy = x0 + t * ex, y0 + t * ey
        d = math.hypot(x - qx, y - qy)
        if d < best:
            best, bq = d, (qx, qy)
    return bq


def _polygon_edge_normal_near(poly: Polygon, x, y) -> tuple:
    best, bn = math.inf, (1.0, 0.0)
    for (x0, y0), (x1, y1) in poly.edges:
        mx, my = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        d = math.hypot(x - mx, y - my)
        if d < best:
            ex, ey = x1 - x0, y1 - y0
            ln = math.hypot(ex, ey)
            best, bn = d, (ey / ln, -ex / ln)
    return bn


# ---------------------------------------------------------------------------
# boundary discretization
# ---------------------------------------------------------------------------

def boundary_samples(region: Region, spacing: float,
                     extent: float | None = None) -> list:
    """Discretize the region boundary into samples of width ~``spacing``.

    For a half-plane the infinite boundary line is truncated to
    ``|Im z| <= extent`` (the caller supplies the solver box extent).
    Samples are ordered along the boundary, arc weights sum to the exact
    perimeter of the truncated boundary, and normals point out of U.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if isinstance(region, HalfPlane):
        if extent is None:
            raise ValueError("half-plane boundary needs a truncation extent")
        count = max(2, int(math.ceil(2.0 * extent / spacing)))
        w = 2.0 * extent / count
        ys = -extent + (np.arange(count) + 0.5) * w
        return [BoundarySample(Point(-region.a, float(yy)), w, (1.0, 0.0))
                for yy in ys]
    if isinstance(region, Disk):
        if spacing > region.radius:
            raise ValueError("boundary under-resolved")
        perim = 2.0 * math.pi * region.radius
        count = max(8, int(math.ceil(perim / spacing)))
        count += count % 2  # keep the sampling symmetric under y -> -y
        w = perim / count
        cx, cy = region.center
        out = []
        for k in range(count):
            th = 2.0 * math.pi * (k + 0.5) / count
            nx, ny = math.cos(th), math.sin(th)
            pos = Point(cx + region.radius * nx, cy + region.radius * ny)
            out.append(BoundarySample(pos, w, (nx, ny)))
        return out
    if isinstance(region, Polygon):
        min_edge = min(math.hypot(x1 - x0, y1 - y0)
                       for (x0, y0), (x1, y1) in region.edges)
        if spacing > min_edge:
            raise ValueError("boundary under-resolved")
        out = []
        for (x0, y0), (x1, y1) in region.edges:
            ex, ey = x1 - x0, y1 - y0
            ln = math.hypot(ex, ey)
            pieces = max(1, int(math.ceil(ln / spacing)))
            w = ln / pieces
            # counter-clockwise orientation puts the outward normal at
            # (dy, -dx) / len
            nx, ny = ey / ln, -ex / ln
            for k in range(pieces):
                t = (k + 0.5) / pieces
                out.append(BoundarySample(Point(x0 + t * ex, y0 + t * ey),
                                          w, (nx, ny)))
        return out
    raise TypeError(f"unknown region type {type(region)!r}")


# ---------------------------------------------------------------------------
# circular-law mass
# ---------------------------------------------------------------------------

def circular_law_mass(region: Region) -> float:
    """Mass that the uniform unit-disk law assigns to U: area(U & D) / pi.

    Closed forms for half-plane (circular segment) and disk (lens area);
    adaptive quadrature for polygons.
    """
    if isinstance(region, HalfPlane):
        c = -region.a  # U & D = {x < c} & D
        if c <= -1.0:
            return 0.0
        if c >= 1.0:
            return 1.0
        area = math.pi / 2.0 + math.asin(c) + c * math.sqrt(1.0 - c * c)
        return area / math.pi
    if isinstance(region, Disk):
        return _disk_disk_area(region.center, region.radius) / math.pi
    if isinstance(region, Polygon):
        return _polygon_disk_area(region) / math.pi
    raise TypeError(f"unknown region type {type(region)!r}")


def _disk_disk_area(center, r: float) -> float:
    """Area of the intersection of Disk(center, r) with the unit disk."""
    d = math.hypot(*center)
    R = 1.0
    if d >= r + R:
        return 0.0
    if d <= abs(R - r):
        return math.pi * min(r, R) ** 2
    a1 = r * r * math.acos((d * d + r * r - R * R) / (2.0 * d * r))
    a2 = R * R * math.acos((d * d + R * R - r * r) / (2.0 * d * R))
    k = ((-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R))
    return a1 + a2 - 0.5 * math.sqrt(max(k, 0.0))


def _polygon_disk_area(poly: Polygon) -> float:
    """Area of polygon & unit disk by adaptive integration of the
    cross-section length over y."""

    ys = sorted({y for x, y in poly.vertices} | {-1.0, 1.0})
    ys = [y for y in ys if -1.0 <= y <= 1.0]

    def xlen(y: float) -> float:
        if abs(y) >= 1.0:
            return 0.0
        xs = []
        for (x0, y0), (x1, y1) in poly.edges:
            # quadrature abscissae avoid vertex heights, so strict
            # crossings are enough and keep the count even
            if (y0 - y) * (y1 - y) < 0.0:
                t = (y - y0) / (y1 - y0)
                xs.append(x0 + t * (x1 - x0))
        xs.sort()
        half = math.sqrt(1.0 - y * y)
        total = 0.0
        for lo, hi in zip(xs[0::2], xs[1::2]):
            total += max(0.0, min(hi, half) - max(lo, -half))
        return total

    val, _ = integrate.quad(xlen, -1.0, 1.0, points=ys, limit=200)
    return val


def region_diameter_proxy(region: Region, box_radius: float) -> float:
    """Diameter of (U & box) united with the unit disk; used only to size
    calibration brackets."""
    lo = np.array([-1.0, -1.0])
    hi = np.array([1.0, 1.0])
    if isinstance(region, HalfPlane):
        blo = np.array([-box_radius, -box_radius])
        bhi = np.array([min(-region.a, box_radius), box_radius])
    elif isinstance(region, Disk):
        cx, cy = region.center
        blo = np.array([cx - region.radius, cy - region.radius])
        bhi = np.array([cx + region.radius, cy + region.radius])
    else:
        vs = np.asarray(region.vertices)
        blo, bhi = vs.min(axis=0), vs.max(axis=0)
    blo = np.clip(blo, -box_radius, box_radius)
    bhi = np.clip(bhi, -box_radius, box_radius)
    if np.all(bhi >= blo):
        lo = np.minimum(lo, blo)
        hi = np.maximum(hi, bhi)
    return float(np.hypot(*(hi - lo)))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def region_from_config(cfg: dict) -> Region:
    kind = cfg.get("type")
    if kind == "halfplane":
        return HalfPlane(a=float(cfg["a"]))
    if kind == "disk":
        return Disk(center=tuple(cfg["center"]), radius=float(cfg["radius"]))
    if kind == "polygon":
        return Polygon(vertices=tuple(map(tuple, cfg["vertices"])))
    raise ValueError(f"unknown region type {kind!r}")


def region_to_config(region: Region) -> dict:
    if isinstance(region, HalfPlane):
        return {"type": "halfplane", "a": region.a}
    if isinstance(region, Disk):
        return {"type": "disk", "center": list(region.center),
                "radius": region.radius}
    if isinstance(region, Polygon):
        return {"type": "polygon", "vertices": [list(v) for v in region.vertices]}
    raise TypeError(f"unknown region type {type(region)!r}")
