"""Fat-robot visibility and per-robot snapshots.

Robots are closed disks of diameter 1. Robot ``a`` sees robot ``b`` when some
straight segment from the boundary of ``a`` to the boundary of ``b`` has a
relative interior that misses every other (closed) disk.

The exact test sweeps the direction of the candidate line. For a fixed
direction the problem is one-dimensional in the line offset: the line must
cross both end disks, and a blocker whose projection lies strictly between the
ends removes a closed offset interval of width 1. That combinatorial picture
only changes at a finite set of critical directions, so checking one direction
inside every gap between consecutive critical directions is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geom import DEFAULT_TOL, Point, Tolerances, convex_hull, dist, point_segment_distance

RADIUS = 0.5
HALF_PI = math.pi / 2


class InvalidConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    """A robot's private axes: rotation (radians) and optional mirror.

    The origin is wherever the robot currently is, so local coordinates are
    always egocentric. ``to_local`` rotates by ``-rotation`` and then mirrors
    the y axis when ``reflect`` is set; a 90 degree frame maps world (1, 0)
    to local (0, -1).
    """

    rotation: float = 0.0
    reflect: bool = False
    origin: Point = (0.0, 0.0)

    def at(self, origin: Point) -> Frame:
        return Frame(self.rotation, self.reflect, origin)

    def to_local(self, p: Point) -> Point:
        x, y = p[0] - self.origin[0], p[1] - self.origin[1]
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        lx, ly = c * x + s * y, -s * x + c * y
        return (lx, -ly) if self.reflect else (lx, ly)

    def to_world(self, q: Point) -> Point:
        x, y = q
        if self.reflect:
            y = -y
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return (c * x - s * y + self.origin[0], s * x + c * y + self.origin[1])

    def vector_to_world(self, v: Point) -> Point:
        x, y = v
        if self.reflect:
            y = -y
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return (c * x - s * y, s * x + c * y)


@dataclass(frozen=True)
class Snapshot:
    visible: tuple[Point, ...]
    observer_local_origin: Point = (0.0, 0.0)


def _wrap(psi: float) -> float:
    """Map an undirected line angle into [-pi/2, pi/2)."""
    return (psi + HALF_PI) % math.pi - HALF_PI


def _blocked_along(psi: float, bx: float, blockers: Sequence[Point]) -> bool:
    # a sits at the origin and b at (bx, 0) in the rotated frame
    c, s = math.cos(psi), math.sin(psi)
    # line offset coordinate of a point p is -p.x*s + p.y*c
    ob = -bx * s
    lo = max(0.0, ob) - RADIUS
    hi = min(0.0, ob) + RADIUS
    if hi < lo:
        return True
    tb = bx * c
    spans = []
    for qx, qy in blockers:
        tq = qx * c + qy * s
        if 0.0 < tq < tb:
            oq = -qx * s + qy * c
            spans.append((oq - RADIUS, oq + RADIUS))
    if not spans:
        return False
    spans.sort()
    cursor = lo
    for s0, s1 in spans:
        if s0 > cursor:
            return False  # open gap (cursor, s0) inside [lo, hi]
        cursor = max(cursor, s1)
        if cursor >= hi:
            return True
    return cursor >= hi


def _critical_angles(centers: Sequence[Point], blockers: Sequence[Point]) -> list[float]:
    out = []
    m = len(centers)
    for i in range(m):
        xi, yi = centers[i]
        for j in range(i + 1, m):
            vx, vy = xi - centers[j][0], yi - centers[j][1]
            L = math.hypot(vx, vy)
            beta = math.atan2(vy, vx)
            out.append(_wrap(beta))
            if L >= 1.0:
                g = math.asin(1.0 / L)
                out.extend(_wrap(beta + d) for d in (g, -g))
    for k, (qx, qy) in enumerate(blockers):
        # projection of q passes the projection of a (index 0) or b (index 1)
        for ex, ey in centers[:2]:
            out.append(_wrap(math.atan2(qy - ey, qx - ex) + HALF_PI))
    out.sort()
    return out


def _sees_exact(a: Point, b: Point, blockers: Sequence[Point]) -> bool:
    dx, dy = b[0] - a[0], b[1] - a[1]
    bx = math.hypot(dx, dy)
    c, s = dx / bx, dy / bx
    local = [((q[0] - a[0]) * c + (q[1] - a[1]) * s, -(q[0] - a[0]) * s + (q[1] - a[1]) * c) for q in blockers]
    if not _blocked_along(0.0, bx, local):
        return True
    crit = _critical_angles([(0.0, 0.0), (bx, 0.0)] + local, local)
    bounds = [-HALF_PI] + crit + [HALF_PI]
    for lo, hi in zip(bounds, bounds[1:]):
        if hi - lo > 1e-12 and not _blocked_along(0.5 * (lo + hi), bx, local):
            return True
    return False


def corridor_blockers(a: Point, b: Point, others: Sequence[Point]) -> list[Point]:
    """Robots whose disk reaches the convex hull of the disks at ``a`` and ``b``."""
    return [q for q in others if point_segment_distance(q, a, b) <= 2 * RADIUS + 1e-12]


def can_see(a: Point, b: Point, blockers: Sequence[Point], tol: Tolerances = DEFAULT_TOL) -> bool:
    if dist(a, b) < 1 - tol.eps_geom:
        raise InvalidConfiguration("invalid configuration")
    for q in blockers:
        if dist(q, a) < 1 - tol.eps_geom or dist(q, b) < 1 - tol.eps_geom:
            raise InvalidConfiguration("invalid configuration")
    near = corridor_blockers(a, b, blockers)
    if not near:
        return True
    return _sees_exact(a, b, near)


def _check_spacing(pts: np.ndarray, tol: Tolerances) -> None:
    n = len(pts)
    if n < 2:
        return
    x, y = pts[:, 0], pts[:, 1]
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    d2 = dx * dx + dy * dy
    np.fill_diagonal(d2, np.inf)
    if d2.min() < (1 - tol.eps_geom) ** 2:
        raise InvalidConfiguration("invalid configuration")


@dataclass
class VisibilityCache:
    """Memo of exact pair decisions keyed by the positions involved."""

    table: dict = field(default_factory=dict)
    limit: int = 200_000

    def lookup(self, key):
        return self.table.get(key)

    def store(self, key, value: bool) -> None:
        if len(self.table) >= self.limit:
            self.table.clear()
        self.table[key] = value


def visibility_matrix(
    positions: Sequence[Point], tol: Tolerances = DEFAULT_TOL, cache: VisibilityCache | None = None
) -> np.ndarray:
    """Symmetric boolean matrix of mutual visibility (diagonal False)."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pts)
    _check_spacing(pts, tol)
    vis = np.ones((n, n), dtype=bool)
    np.fill_diagonal(vis, False)
    if n < 3:
        return vis
    iu, ju = np.triu_indices(n, 1)
    x, y = pts[:, 0], pts[:, 1]
    ax, ay = x[iu], y[iu]
    abx, aby = x[ju] - ax, y[ju] - ay
    inv = 1.0 / (abx * abx + aby * aby)
    # (pairs, n) distances from every robot to every pair's center segment,
    # kept per component: reducing over a length-2 axis is slow in numpy
    rx = x[None, :] - ax[:, None]
    ry = y[None, :] - ay[:, None]
    t = (rx * abx[:, None] + ry * aby[:, None]) * inv[:, None]
    np.clip(t, 0.0, 1.0, out=t)
    rx -= t * abx[:, None]
    ry -= t * aby[:, None]
    near = rx * rx + ry * ry <= (2 * RADIUS + 1e-12) ** 2
    rows = np.arange(len(iu))
    near[rows, iu] = False
    near[rows, ju] = False
    plist = [tuple(p) for p in pts.tolist()]
    for p in np.nonzero(near.any(axis=1))[0].tolist():
        i, j = int(iu[p]), int(ju[p])
        pa, pb = plist[i], plist[j]
        blk = [plist[k] for k in np.flatnonzero(near[p]).tolist()]
        key = (pa, pb, tuple(blk))
        seen = cache.lookup(key) if cache is not None else None
        if seen is None:
            seen = _sees_exact(pa, pb, blk)
            if cache is not None:
                cache.store(key, seen)
        vis[i, j] = vis[j, i] = seen
    return vis


def snapshot(
    world_positions: Sequence[Point],
    observer_index: int,
    frames: Sequence[Frame],
    tol: Tolerances = DEFAULT_TOL,
    vis: np.ndarray | None = None,
) -> Snapshot:
    if vis is None:
        vis = visibility_matrix(world_positions, tol)
    me = world_positions[observer_index]
    frame = frames[observer_index].at(me)
    return Snapshot(
        tuple(frame.to_local(p) for j, p in enumerate(world_positions) if vis[observer_index, j])
    )


@dataclass(frozen=True)
class ObservedHull:
    vertices: list[Point]
    self_class: str  # "corner", "interior" or "degenerate"
    collinear_triple_seen: bool
    degenerate: bool


def _collinear_triple(points: Sequence[Point], eps: float) -> bool:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 3:
        return False
    for k in range(n):
        others = np.delete(pts, k, axis=0)
        i, j = np.triu_indices(n - 1, 1)
        a, b = others[i], others[j]
        ab = b - a
        denom = (ab**2).sum(-1)
        t = ((pts[k] - a) * ab).sum(-1) / denom
        inside = (t > 0) & (t < 1)
        foot = a + t[:, None] * ab
        d = np.sqrt(((pts[k] - foot) ** 2).sum(-1))
        if np.any(inside & (d <= eps)):
            return True
    return False


def observed_hull(s: Snapshot, tol: Tolerances = DEFAULT_TOL, check_collinear: bool = True) -> ObservedHull:
    """Hull of the observer and what it sees, with the observer's role in it.

    ``self_class`` is "corner" for a strict vertex, "degenerate" when everything
    observed is collinear and the observer is strictly between the extremes,
    else "interior". A lone robot, or an extreme of a collinear set, counts as
    a corner.
    """
    origin = (0.0, 0.0)
    pts = [origin, *s.visible]
    hull = convex_hull(pts, tol.eps_geom)
    is_vertex = origin in hull.vertices
    if hull.degenerate and len(pts) >= 3:
        cls = "corner" if is_vertex else "degenerate"
    else:
        cls = "corner" if is_vertex else "interior"
    triple = _collinear_triple(pts, tol.eps_geom) if check_collinear else False
    return ObservedHull(hull.vertices, cls, triple, hull.degenerate)
