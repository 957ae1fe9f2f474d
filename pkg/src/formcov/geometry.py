"""Planar geometry kernel: polygons, line of sight, feasibility and projections.

Points are ``numpy`` arrays of shape ``(2,)`` (anything ``np.asarray`` turns
into one is accepted).  Only obstacle interiors are infeasible, so points on
an obstacle boundary are feasible and segments sliding along an edge are not
blocked.  Every predicate uses the absolute tolerance ``EPS_GEO``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NoFeasibleProjection, ValidationError

EPS_GEO = 1e-9

# Positions live on a dyadic lattice so that translating a formation by a
# lattice vector is exact in floating point.
SNAP_SCALE = float(2**32)


def snap(p) -> np.ndarray:
    """Round a point (or array of points) to the 2**-32 lattice."""
    return np.round(np.asarray(p, dtype=float) * SNAP_SCALE) / SNAP_SCALE


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed segment intersection test (touching counts)."""
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_seg(a, b, c, d):
        return d == 0 and min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (
        on_seg(q1, q2, p1, d1)
        or on_seg(q1, q2, p2, d2)
        or on_seg(p1, p2, q1, d3)
        or on_seg(p1, p2, q2, d4)
    )


class Polygon:
    """Simple polygon with vertices stored counterclockwise."""

    def __init__(self, vertices: Iterable[Sequence[float]], validate: bool = True):
        v = np.array([[float(x), float(y)] for x, y in vertices], dtype=float)
        if validate:
            v = self._check(v)
        if self.signed_area_of(v) < 0:
            v = v[::-1].copy()
        self.vertices = v
        self.starts = v
        self.ends = np.roll(v, -1, axis=0)
        self.edges = self.ends - self.starts
        self.lo = v.min(axis=0)
        self.hi = v.max(axis=0)

    @staticmethod
    def signed_area_of(v) -> float:
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def area(self) -> float:
        return self.signed_area_of(self.vertices)

    @staticmethod
    def _check(v):
        if v.ndim != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        if np.any(np.all(v == np.roll(v, -1, axis=0), axis=1)):
            raise ValueError("consecutive polygon vertices must differ")
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise ValueError("polygon is self-intersecting")
        if abs(Polygon.signed_area_of(v)) <= 0.0:
            raise ValueError("polygon has zero area")
        return v

    def contains_strict(self, pts) -> np.ndarray:
        """Crossing-number containment for an ``(M, 2)`` array; boundary is ambiguous."""
        pts = np.atleast_2d(pts)
        x = pts[:, 0:1]
        y = pts[:, 1:2]
        xi, yi = self.starts[:, 0], self.starts[:, 1]
        xj, yj = self.ends[:, 0], self.ends[:, 1]
        straddle = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (xj - xi) * (y - yi) / (yj - yi) + xi
        crossings = straddle & (x < xint)
        return (np.count_nonzero(crossings, axis=1) % 2) == 1

    def boundary_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = pts[:, None, :] - self.starts[None, :, :]
        ee = np.einsum("ij,ij->i", self.edges, self.edges)
        t = np.clip(np.einsum("mij,ij->mi", d, self.edges) / ee, 0.0, 1.0)
        closest = self.starts[None, :, :] + t[:, :, None] * self.edges[None, :, :]
        return np.sqrt(np.min(np.sum((pts[:, None, :] - closest) ** 2, axis=2), axis=1))

    def depth(self, pts) -> np.ndarray:
        """Signed penetration depth: distance to the boundary, positive inside."""
        dist = self.boundary_distance(pts)
        return np.where(self.contains_strict(pts), dist, -dist)

    def to_list(self):
        return [[float(x), float(y)] for x, y in self.vertices]


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("degenerate mission rectangle")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, pts, eps: float = EPS_GEO) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (
            (pts[:, 0] >= self.xmin - eps)
            & (pts[:, 0] <= self.xmax + eps)
            & (pts[:, 1] >= self.ymin - eps)
            & (pts[:, 1] <= self.ymax + eps)
        )

    def corners(self) -> np.ndarray:
        return np.array(
            [[self.xmin, self.ymin], [self.xmax, self.ymin], [self.xmax, self.ymax], [self.xmin, self.ymax]]
        )


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane ``{p : normal . p >= offset}``."""

    normal: tuple
    offset: float

    def contains(self, p, eps: float = EPS_GEO) -> bool:
        return float(np.dot(self.normal, np.asarray(p, dtype=float))) >= self.offset - eps


@dataclass
class Scene:
    rect: Rect
    obstacles: list = field(default_factory=list)

    def __post_init__(self):
        self.obstacles = [o if isinstance(o, Polygon) else Polygon(o) for o in self.obstacles]

    def validate(self) -> None:
        """Check that obstacles lie in the rectangle and do not overlap."""
        for k, poly in enumerate(self.obstacles):
            if not np.all(self.rect.contains(poly.vertices, eps=0.0)):
                raise ValidationError(f"obstacles[{k}]", "obstacle leaves the mission rectangle")
        for a in range(len(self.obstacles)):
            for b in range(a + 1, len(self.obstacles)):
                if _interiors_overlap(self.obstacles[a], self.obstacles[b]):
                    raise ValidationError(f"obstacles[{b}]", f"interior overlaps obstacles[{a}]")

    @property
    def area(self) -> float:
        return self.rect.area


def _interiors_overlap(p: Polygon, q: Polygon) -> bool:
    if np.any(p.hi <= q.lo) or np.any(q.hi <= p.lo):
        return False
    for a, b in zip(p.starts, p.ends):
        for c, d in zip(q.starts, q.ends):
            d1 = _cross(d - c, a - c)
            d2 = _cross(d - c, b - c)
            d3 = _cross(b - a, c - a)
            d4 = _cross(b - a, d - a)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    if np.any(q.depth(p.vertices) > EPS_GEO) or np.any(p.depth(q.vertices) > EPS_GEO):
        return True
    # identical or nested shapes sharing all vertices
    cp = p.vertices.mean(axis=0)
    cq = q.vertices.mean(axis=0)
    return bool(q.depth(cp)[0] > EPS_GEO and p.depth(cp)[0] > EPS_GEO) or bool(
        p.depth(cq)[0] > EPS_GEO and q.depth(cq)[0] > EPS_GEO
    )


def feasible_mask(pts, scene: Scene) -> np.ndarray:
    """Vectorised ``point_in_feasible`` over an ``(M, 2)`` array."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ok = scene.rect.contains(pts)
    for poly in scene.obstacles:
        near = np.all((pts >= poly.lo - EPS_GEO) & (pts <= poly.hi + EPS_GEO), axis=1) & ok
        if np.any(near):
            ok[near] &= poly.depth(pts[near]) <= EPS_GEO
    return ok


def point_in_feasible(p, scene: Scene) -> bool:
    return bool(feasible_mask(p, scene)[0])


def _blocked_by(a, b, poly: Polygon) -> bool:
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    if np.any(hi < poly.lo - EPS_GEO) or np.any(lo > poly.hi + EPS_GEO):
        return False
    r = b - a
    rr = float(r @ r)
    if rr == 0.0:
        return bool(poly.depth(a)[0] > EPS_GEO)
    ts = [np.array([0.0, 1.0])]
    rel = poly.starts - a
    denom = _cross(r, poly.edges)
    scale = math.sqrt(rr) * np.sqrt(np.einsum("ij,ij->i", poly.edges, poly.edges))
    good = np.abs(denom) > 1e-14 * scale
    if np.any(good):
        t = _cross(rel[good], poly.edges[good]) / denom[good]
        u = _cross(rel[good], np.broadcast_to(r, rel[good].shape)) / denom[good]
        hit = (u >= -1e-12) & (u <= 1 + 1e-12) & (t >= 0) & (t <= 1)
        ts.append(t[hit])
    # vertex projections pick up collinear overlaps and grazing contacts
    ts.append(np.clip(rel @ r / rr, 0.0, 1.0))
    ts = np.unique(np.concatenate(ts))
    samples = [ts]
    if len(ts) > 1:
        lo_t, hi_t = ts[:-1], ts[1:]
        wide = hi_t - lo_t > 1e-15
        lo_t, hi_t = lo_t[wide], hi_t[wide]
        samples += [lo_t + f * (hi_t - lo_t) for f in (0.25, 0.5, 0.75)]
    s = np.concatenate(samples)
    pts = a[None, :] + s[:, None] * r[None, :]
    return bool(np.any(poly.depth(pts) > EPS_GEO))


def segment_blocked(a, b, scene: Scene) -> bool:
    """True iff some point of segment ``ab`` leaves the feasible space."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.all(scene.rect.contains(np.vstack([a, b]))):
        return True
    return any(_blocked_by(a, b, poly) for poly in scene.obstacles)


def connected_pair(si, sj, C: float, scene: Scene) -> bool:
    si = np.asarray(si, dtype=float)
    sj = np.asarray(sj, dtype=float)
    if math.hypot(si[0] - sj[0], si[1] - sj[1]) > C + EPS_GEO:
        return False
    return not segment_blocked(si, sj, scene)


def visibility_mask(source, pts, scene: Scene) -> np.ndarray:
    """Line-of-sight from ``source`` to each of ``pts`` (vectorised).

    Uses strict edge crossings, so rays passing exactly through an obstacle
    vertex are treated as visible.  Targets inside obstacles are the caller's
    concern (they are masked out of the quadrature anyway).
    """
    s = np.asarray(source, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    vis = np.ones(len(pts), dtype=bool)
    r = pts - s
    for poly in scene.obstacles:
        for p, e in zip(poly.starts, poly.edges):
            o1 = _cross(e, s - p)
            o2 = _cross(e[None, :], pts - p)
            o3 = _cross(r, p - s)
            o4 = _cross(r, p + e - s)
            vis &= ~((o1 * o2 < 0) & (o3 * o4 < 0))
    return vis


def disk_hits_obstacle(center, radius: float, scene: Scene) -> bool:
    """Whether the closed disk meets the open interior of any obstacle."""
    c = np.asarray(center, dtype=float)
    for poly in scene.obstacles:
        if np.any(c + radius < poly.lo) or np.any(c - radius > poly.hi):
            continue
        depth = poly.depth(c)[0]
        if depth > 0.0 or -depth < radius - EPS_GEO:
            return True
    return False


def project_to_disk(x, center, radius: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    d = x - center
    n = math.hypot(d[0], d[1])
    if n <= radius:
        return x.copy()
    return center + radius * d / n


def _segment_projection(x, p, q):
    e = q - p
    ee = float(e @ e)
    if ee == 0.0:
        return p.copy()
    t = min(1.0, max(0.0, float((x - p) @ e) / ee))
    return p + t * e


def _circle_segment_hits(c, C, p, q):
    e = q - p
    a = float(e @ e)
    if a == 0.0:
        return []
    f = p - c
    b = 2 * float(f @ e)
    cc = float(f @ f) - C * C
    disc = b * b - 4 * a * cc
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    out = []
    for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
        if 0.0 <= t <= 1.0:
            out.append(p + t * e)
    return out


def _anchor_candidates(x, a, C, scene: Scene, resolution: int):
    cands = [a.copy(), project_to_disk(x, a, C)]
    theta = 2 * np.pi * np.arange(resolution) / resolution
    ring = a + C * np.column_stack([np.cos(theta), np.sin(theta)])
    cands.extend(ring)
    edges = [(p, q) for poly in scene.obstacles for p, q in zip(poly.starts, poly.ends)]
    corners = scene.rect.corners()
    edges += [(corners[k], corners[(k + 1) % 4]) for k in range(4)]
    for p, q in edges:
        y = _segment_projection(x, p, q)
        if np.hypot(*(y - a)) <= C:
            cands.append(y)
        else:
            cands.append(project_to_disk(y, a, C))
        cands.extend(_circle_segment_hits(a, C, p, q))
        for v in (p, q):
            if np.hypot(*(v - a)) <= C:
                cands.append(v)
    for poly in scene.obstacles:
        for v in poly.vertices:
            d = v - a
            n = math.hypot(d[0], d[1])
            if n == 0.0 or n > C:
                continue
            # shadow ray from the anchor through the vertex
            cands.append(_segment_projection(x, a, a + C * d / n))
    return cands


def project_to_connection_union(
    x,
    anchors,
    C: float,
    scene: Scene,
    resolution: int = 128,
    halfplane: Optional[HalfPlane] = None,
) -> np.ndarray:
    """Approximate nearest point to ``x`` connectable to at least one anchor.

    The result is always a feasible lattice point with ``connected_pair`` true
    for some anchor (and inside ``halfplane`` when given); its distance to
    ``x`` exceeds the true optimum by at most the ring sampling step.
    """
    x = np.asarray(x, dtype=float)
    anchors = [np.asarray(a, dtype=float) for a in anchors]
    if not anchors:
        raise ValueError("anchors must be nonempty")
    if resolution < 64:
        raise ValueError("resolution must be >= 64")

    def valid(y) -> bool:
        if halfplane is not None and not halfplane.contains(y):
            return False
        if not point_in_feasible(y, scene):
            return False
        return any(connected_pair(y, a, C, scene) for a in anchors)

    if valid(x):
        return x.copy()

    # Exact shortcut: when the nearest disk projection is valid, no other
    # region point can be closer.
    disk = [snap(project_to_disk(x, a, C)) for a in anchors]
    nearest = disk[int(np.argmin([np.hypot(*(y - x)) for y in disk]))]
    if valid(nearest):
        return nearest

    cands = []
    for a in anchors:
        cands.extend(_anchor_candidates(x, a, C, scene, resolution))
    cands = snap(np.array(cands))
    d = np.hypot(*(cands - x).T)
    best = None
    for k in np.argsort(d, kind="stable"):
        if valid(cands[k]):
            best = cands[k]
            break
    if best is None:
        raise NoFeasibleProjection("no feasible point in the connection-region union")

    bd = float(np.hypot(*(best - x)))
    step = 2 * np.pi * C / resolution
    dirs = [np.array([math.cos(k * np.pi / 4), math.sin(k * np.pi / 4)]) for k in range(8)]
    for _ in range(4000):
        if step < 1e-9 * max(1.0, C) or bd == 0.0:
            break
        improved = False
        toward = (x - best) / bd
        for u in [toward] + dirs:
            y = snap(best + step * u)
            dy = float(np.hypot(*(y - x)))
            if dy < bd and valid(y):
                best, bd = y, dy
                improved = True
                break
        if not improved:
            step *= 0.5
    return best
