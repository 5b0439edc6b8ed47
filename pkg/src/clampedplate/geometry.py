"""Planar domains and the geometric functionals the eigenvalue bounds consume.

Three immutable shapes are supported: :class:`Disk`, :class:`Rectangle`
(axis aligned) and :class:`Polygon` (simple, counterclockwise). Point
arguments follow numpy conventions: a single ``(x, y)`` pair or an array
whose last axis has length 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon

from .specfun import unit_ball_volume

__all__ = [
    "Domain",
    "Disk",
    "Rectangle",
    "Polygon",
    "GeomSummary",
    "GeometryError",
    "volume",
    "moment_of_inertia",
    "second_moment",
    "boundary_layer_volume",
    "max_curvature",
    "dist_to_boundary",
    "cutoff_fr",
    "laplacian_dist_sq",
    "geom_summary",
    "sample_interior",
]

LAYER_GRID_DIVISIONS = 512


class GeometryError(ValueError):
    """Raised for invalid domains or points where a functional is undefined."""


def _points(x):
    p = np.asarray(x, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return p


class Domain:
    """Base class for bounded planar domains.

    Subclasses provide exact area, centroid, second moments, distance to
    the boundary and line/cell intersection queries.
    """

    n = 2

    def area(self) -> float:
        raise NotImplementedError

    def centroid(self) -> np.ndarray:
        raise NotImplementedError

    def second_moment(self, a=(0.0, 0.0)) -> float:
        """``int_Omega |x - a|^2 dx``."""
        raise NotImplementedError

    def perimeter(self) -> float:
        raise NotImplementedError

    def curvature_bound(self):
        return None

    def bbox(self):
        raise NotImplementedError

    def signed_distance(self, x):
        """Distance to the boundary, positive inside and negative outside."""
        raise NotImplementedError

    def entry_parameter(self, x, direction):
        """Smallest ``s`` with ``x + s*direction`` in the closed domain.

        For a convex domain the line meets it in an interval ``[s_in, s_out]``;
        ``s_in`` is returned (negative when ``x`` lies inside). NaN when the
        line misses the domain.
        """
        raise NotImplementedError

    def cell_area(self, x0, x1, y0, y1):
        """Area of ``[x0, x1] x [y0, y1]`` intersected with the domain."""
        raise NotImplementedError

    def layer_volume_exact(self, r):
        return None

    def foot_curvature(self, x):
        """Signed boundary curvature at the unique nearest boundary point.

        Raises :class:`GeometryError` when the nearest point is not unique or
        lies at a corner.
        """
        raise NotImplementedError

    def is_convex(self) -> bool:
        return True

    def grid_anchor(self):
        """A point the finite-difference grid is aligned to."""
        return np.zeros(2)

    def canonical(self) -> dict:
        raise NotImplementedError

    def contains(self, x):
        return self.signed_distance(x) > 0

    def distance(self, x):
        """``d(x) = dist(x, boundary)`` inside, 0 outside."""
        return np.maximum(self.signed_distance(x), 0.0)


@dataclass(frozen=True)
class Disk(Domain):
    radius: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def area(self):
        return math.pi * self.radius**2

    def centroid(self):
        return np.array(self.center)

    def second_moment(self, a=(0.0, 0.0)):
        offset = np.subtract(self.center, a)
        return math.pi * self.radius**4 / 2 + self.area() * float(offset @ offset)

    def perimeter(self):
        return 2 * math.pi * self.radius

    def curvature_bound(self):
        return 1.0 / self.radius

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cx + r, cy - r, cy + r)

    def signed_distance(self, x):
        p = _points(x) - np.array(self.center)
        return self.radius - np.hypot(p[..., 0], p[..., 1])

    def entry_parameter(self, x, direction):
        p = _points(x) - np.array(self.center)
        e = _points(direction)
        a = np.sum(e * e, axis=-1)
        b = np.sum(p * e, axis=-1)
        c = np.sum(p * p, axis=-1) - self.radius**2
        disc = b * b - a * c
        with np.errstate(invalid="ignore"):
            s = (-b - np.sqrt(disc)) / a
        return np.where(disc >= 0, s, np.nan)

    def cell_area(self, x0, x1, y0, y1):
        cx, cy = self.center
        x0, x1, y0, y1 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x0, x1, y0, y1))
        out = np.array(
            [
                _disk_box_area(self.radius, a - cx, b - cx, c - cy, d - cy)
                for a, b, c, d in zip(x0, x1, y0, y1)
            ]
        )
        return out

    def layer_volume_exact(self, r):
        width = 1.0 / r
        if width >= self.radius:
            return self.area()
        return math.pi * (self.radius**2 - (self.radius - width) ** 2)

    def foot_curvature(self, x):
        p = _points(x) - np.array(self.center)
        rho = np.hypot(p[..., 0], p[..., 1])
        if np.any(rho <= 1e-12 * self.radius):
            raise GeometryError("the disk centre has no unique nearest boundary point")
        return np.full(rho.shape, 1.0 / self.radius)

    def grid_anchor(self):
        return np.array(self.center)

    def scaled(self, t):
        return Disk(self.radius * t, tuple(t * c for c in self.center))

    def translated(self, offset):
        return Disk(self.radius, tuple(np.add(self.center, offset)))

    def canonical(self):
        return {"disk": {"center": list(self.center), "radius": self.radius}}


def _sqrt_integral(R, x):
    """Antiderivative of ``sqrt(R^2 - x^2)``."""
    x = min(max(x, -R), R)
    return 0.5 * (x * math.sqrt(R * R - x * x) + R * R * math.asin(x / R))


def _disk_box_area(R, x0, x1, y0, y1):
    """Exact area of a box intersected with the centred disk of radius R."""
    cuts = {x0, x1}
    for y in (y0, y1):
        if abs(y) < R:
            xb = math.sqrt(R * R - y * y)
            cuts.update(c for c in (-xb, xb) if x0 < c < x1)
    cuts.update(c for c in (-R, R) if x0 < c < x1)
    pts = sorted(cuts)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        if abs(mid) >= R:
            continue
        s = math.sqrt(R * R - mid * mid)
        top_flat = y1 < s
        bot_flat = y0 > -s
        top = y1 if top_flat else s
        bot = y0 if bot_flat else -s
        if top <= bot:
            continue
        arc = _sqrt_integral(R, b) - _sqrt_integral(R, a)
        upper = y1 * (b - a) if top_flat else arc
        lower = y0 * (b - a) if bot_flat else -arc
        total += upper - lower
    return total


@dataclass(frozen=True)
class Rectangle(Domain):
    """Axis-aligned rectangle ``[x0, x0 + width] x [y0, y0 + height]``."""

    width: float
    height: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise GeometryError("rectangle sides must be positive")
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))

    def area(self):
        return self.width * self.height

    def centroid(self):
        return np.array(self.origin) + 0.5 * np.array([self.width, self.height])

    def second_moment(self, a=(0.0, 0.0)):
        w, h = self.width, self.height
        offset = self.centroid() - np.asarray(a, dtype=float)
        return w * h * (w * w + h * h) / 12 + self.area() * float(offset @ offset)

    def perimeter(self):
        return 2 * (self.width + self.height)

    def bbox(self):
        x0, y0 = self.origin
        return (x0, x0 + self.width, y0, y0 + self.height)

    def signed_distance(self, x):
        p = _points(x)
        x0, x1, y0, y1 = self.bbox()
        dx = np.minimum(p[..., 0] - x0, x1 - p[..., 0])
        dy = np.minimum(p[..., 1] - y0, y1 - p[..., 1])
        inside = np.minimum(dx, dy)
        ox = np.maximum(-dx, 0.0)
        oy = np.maximum(-dy, 0.0)
        outside = -np.hypot(ox, oy)
        return np.where((dx >= 0) & (dy >= 0), inside, outside)

    def entry_parameter(self, x, direction):
        p = _points(x)
        e = _points(direction)
        x0, x1, y0, y1 = self.bbox()
        lo = np.full(np.broadcast(p[..., 0], e[..., 0]).shape, -np.inf)
        hi = np.full_like(lo, np.inf)
        for axis, (a, b) in enumerate(((x0, x1), (y0, y1))):
            pa = p[..., axis] + 0 * e[..., axis]
            ea = e[..., axis] + 0 * p[..., axis]
            moving = ea != 0
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (a - pa) / ea
                t2 = (b - pa) / ea
            lo = np.where(moving, np.maximum(lo, np.minimum(t1, t2)), lo)
            hi = np.where(moving, np.minimum(hi, np.maximum(t1, t2)), hi)
            missing = ~moving & ((pa < a) | (pa > b))
            lo = np.where(missing, np.nan, lo)
        return np.where(lo <= hi, lo, np.nan)

    def cell_area(self, x0, x1, y0, y1):
        a0, a1, b0, b1 = self.bbox()
        wx = np.clip(np.minimum(x1, a1) - np.maximum(x0, a0), 0, None)
        wy = np.clip(np.minimum(y1, b1) - np.maximum(y0, b0), 0, None)
        return np.atleast_1d(wx * wy)

    def layer_volume_exact(self, r):
        width = 1.0 / r
        inner = max(self.width - 2 * width, 0.0) * max(self.height - 2 * width, 0.0)
        return self.area() - inner

    def as_polygon(self):
        x0, x1, y0, y1 = self.bbox()
        return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    def foot_curvature(self, x):
        return self.as_polygon().foot_curvature(x)

    def grid_anchor(self):
        return np.array(self.origin)

    def scaled(self, t):
        return Rectangle(self.width * t, self.height * t, tuple(t * c for c in self.origin))

    def translated(self, offset):
        return Rectangle(self.width, self.height, tuple(np.add(self.origin, offset)))

    def canonical(self):
        return {"rect": {"h": self.height, "origin": list(self.origin), "w": self.width}}


@dataclass(frozen=True)
class Polygon(Domain):
    """Simple polygon with counterclockwise vertices (no repeated endpoint)."""

    vertices: tuple
    _shape: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = tuple(tuple(float(c) for c in v) for v in self.vertices)
        if len(verts) < 3:
            raise GeometryError("polygon needs at least three vertices")
        object.__setattr__(self, "vertices", verts)
        shape = _ShapelyPolygon(verts)
        if not shape.is_valid or shape.area <= 0:
            raise GeometryError("polygon must be simple with positive area")
        if _shoelace(np.array(verts)) <= 0:
            raise GeometryError("polygon vertices must be counterclockwise")
        object.__setattr__(self, "_shape", shape)

    @property
    def _v(self):
        return np.array(self.vertices)

    def _edges(self):
        v = self._v
        return v, np.roll(v, -1, axis=0)

    def area(self):
        return _shoelace(self._v)

    def centroid(self):
        a, b = self._edges()
        cross = a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]
        cx = np.sum((a[:, 0] + b[:, 0]) * cross) / 6
        cy = np.sum((a[:, 1] + b[:, 1]) * cross) / 6
        return np.array([cx, cy]) / self.area()

    def second_moment(self, a=(0.0, 0.0)):
        # signed fan triangulation about the reference point; exact for quadratics
        p, q = self._edges()
        p = p - np.asarray(a, dtype=float)
        q = q - np.asarray(a, dtype=float)
        cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
        ixx = np.sum(cross * (p[:, 1] ** 2 + p[:, 1] * q[:, 1] + q[:, 1] ** 2)) / 12
        iyy = np.sum(cross * (p[:, 0] ** 2 + p[:, 0] * q[:, 0] + q[:, 0] ** 2)) / 12
        return float(ixx + iyy)

    def perimeter(self):
        a, b = self._edges()
        return float(np.sum(np.hypot(*(b - a).T)))

    def bbox(self):
        v = self._v
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    def _edge_distances(self, p):
        a, b = self._edges()
        ab = b - a
        rel = p[..., None, :] - a
        t = np.clip(np.sum(rel * ab, axis=-1) / np.sum(ab * ab, axis=-1), 0.0, 1.0)
        foot = a + t[..., None] * ab
        dist = np.hypot(*np.moveaxis(p[..., None, :] - foot, -1, 0))
        return dist, t

    def _inside(self, p):
        a, b = self._edges()
        x = p[..., 0][..., None]
        y = p[..., 1][..., None]
        crosses = (a[:, 1] > y) != (b[:, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        return np.sum(crosses & (x < xint), axis=-1) % 2 == 1

    def signed_distance(self, x):
        p = _points(x)
        dist, _ = self._edge_distances(p)
        d = dist.min(axis=-1)
        return np.where(self._inside(p), d, -d)

    def is_convex(self):
        v = self._v
        e = np.roll(v, -1, axis=0) - v
        f = np.roll(e, -1, axis=0)
        return bool(np.all(e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0] >= -1e-14))

    def entry_parameter(self, x, direction):
        if not self.is_convex():
            raise GeometryError("line entry queries need a convex polygon")
        p = _points(x)
        e = _points(direction)
        a, b = self._edges()
        ab = b - a
        normal = np.stack([ab[:, 1], -ab[:, 0]], axis=-1)  # outward for ccw
        num = np.sum((a - p[..., None, :]) * normal, axis=-1)
        den = np.sum(e[..., None, :] * normal, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / den
        lo = np.max(np.where(den < 0, t, -np.inf), axis=-1)
        hi = np.min(np.where(den > 0, t, np.inf), axis=-1)
        parallel_out = np.any((den == 0) & (num < 0), axis=-1)
        return np.where((lo <= hi) & ~parallel_out, lo, np.nan)

    def cell_area(self, x0, x1, y0, y1):
        boxes = shapely.box(x0, y0, x1, y1)
        return np.atleast_1d(shapely.area(shapely.intersection(boxes, self._shape)))

    def foot_curvature(self, x):
        p = _points(x)
        dist, t = self._edge_distances(p)
        order = np.sort(dist, axis=-1)
        scale = max(self.bbox()[1] - self.bbox()[0], self.bbox()[3] - self.bbox()[2])
        tol = 1e-12 * scale
        if np.any(order[..., 1] - order[..., 0] <= tol):
            raise GeometryError("point is equidistant from two boundary edges")
        nearest = np.argmin(dist, axis=-1)
        tn = np.take_along_axis(t, nearest[..., None], axis=-1)[..., 0]
        if np.any((tn <= 0.0) | (tn >= 1.0)):
            raise GeometryError("nearest boundary point is a corner")
        return np.zeros(p.shape[:-1])

    def grid_anchor(self):
        x0, _, y0, _ = self.bbox()
        return np.array([x0, y0])

    def scaled(self, t):
        return Polygon(tuple((t * x, t * y) for x, y in self.vertices))

    def translated(self, offset):
        dx, dy = offset
        return Polygon(tuple((x + dx, y + dy) for x, y in self.vertices))

    def canonical(self):
        return {"polygon": {"vertices": [list(v) for v in self.vertices]}}


def _shoelace(v):
    x, y = v[:, 0], v[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class GeomSummary:
    n: int
    vol: float
    centroid: tuple
    inertia: float
    kappa: float | None
    ball_vol: float
    perimeter: float


def volume(domain: Domain) -> float:
    return domain.area()


def moment_of_inertia(domain: Domain) -> float:
    """``I(Omega) = min_a int |x - a|^2 dx``, attained at the centroid."""
    return domain.second_moment(domain.centroid())


def second_moment(domain: Domain, a) -> float:
    return domain.second_moment(a)


def _layer_volume_grid(domain, r, h=None):
    x0, x1, y0, y1 = domain.bbox()
    if h is None:
        h = math.hypot(x1 - x0, y1 - y0) / LAYER_GRID_DIVISIONS
    xs = np.arange(x0 + h / 2, x1, h)
    ys = np.arange(y0 + h / 2, y1, h)
    total = 0
    for chunk in np.array_split(xs, max(1, xs.size // 64)):
        X, Y = np.meshgrid(chunk, ys, indexing="ij")
        d = domain.signed_distance(np.stack([X, Y], axis=-1))
        total += int(np.count_nonzero((d > 0) & (d < 1.0 / r)))
    return total * h * h


def boundary_layer_volume(domain: Domain, r: float, method: str = "auto", h=None) -> float:
    """Area of ``{x in Omega : d(x) < 1/r}``.

    ``method="exact"`` uses the closed form (disk, rectangle), ``"grid"``
    counts midpoint cells of size ``h`` (default: bounding-box diagonal / 512);
    ``"auto"`` prefers the closed form.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    if method not in ("auto", "exact", "grid"):
        raise ValueError(f"unknown method {method!r}")
    if method != "grid":
        exact = domain.layer_volume_exact(r)
        if exact is not None:
            return exact
        if method == "exact":
            raise GeometryError(f"no closed form for {type(domain).__name__}")
    return _layer_volume_grid(domain, r, h)


def max_curvature(domain: Domain):
    """Maximum boundary curvature, or ``None`` for boundaries with corners."""
    return domain.curvature_bound()


def dist_to_boundary(domain: Domain, x):
    d = domain.distance(x)
    return float(d) if np.ndim(d) == 0 else d


def cutoff_fr(domain: Domain, r: float, x):
    """The boundary cutoff: 1 deep inside, ``r^2 d^2`` in the layer, 0 outside."""
    if not r > 0:
        raise ValueError("r must be positive")
    sd = domain.signed_distance(x)
    val = np.where(sd >= 1.0 / r, 1.0, np.where(sd > 0, (r * sd) ** 2, 0.0))
    return float(val) if np.ndim(val) == 0 else val


def laplacian_dist_sq(domain: Domain, x):
    """``Delta(d^2)(x) = 2n - 2/(1 - kappa d)`` in the plane (n = 2).

    ``kappa`` is the signed curvature at the nearest boundary point. Points
    on the medial axis or with a corner as nearest point are rejected.
    """
    p = _points(x)
    sd = domain.signed_distance(p)
    if np.any(sd <= 0):
        raise GeometryError("laplacian_dist_sq needs points inside the domain")
    kappa = domain.foot_curvature(p)
    denom = 1.0 - kappa * sd
    if np.any(denom <= 0):
        raise GeometryError("point lies beyond the focal distance of the boundary")
    n = domain.n
    val = 2 * n - (n - 1) * 2.0 / denom
    return float(val) if np.ndim(val) == 0 else val


def geom_summary(domain: Domain) -> GeomSummary:
    n = domain.n
    return GeomSummary(
        n=n,
        vol=volume(domain),
        centroid=tuple(float(c) for c in domain.centroid()),
        inertia=moment_of_inertia(domain),
        kappa=max_curvature(domain),
        ball_vol=unit_ball_volume(n),
        perimeter=domain.perimeter(),
    )


def sample_interior(domain: Domain, count: int, rng, where=None):
    """Uniform rejection samples from the domain, optionally filtered by ``where``."""
    x0, x1, y0, y1 = domain.bbox()
    out = []
    have = 0
    while have < count:
        p = np.column_stack([rng.uniform(x0, x1, 4 * count), rng.uniform(y0, y1, 4 * count)])
        keep = domain.signed_distance(p) > 0
        if where is not None:
            keep &= where(p)
        p = p[keep]
        out.append(p)
        have += len(p)
    return np.concatenate(out)[:count]
