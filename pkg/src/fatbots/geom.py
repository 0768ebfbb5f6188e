"""2D geometric primitives shared by the simulator and the robot algorithm.

Points are plain ``(x, y)`` float tuples; one unit is one robot diameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

Point = tuple[float, float]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    eps_geom: float = 1e-9
    eps_adj: float = 5e-3
    clearance: float = 1.05

    def __post_init__(self):
        if not (0 < self.eps_geom < self.eps_adj < self.clearance - 1):
            raise ValueError(f"inconsistent tolerances: {self}")


DEFAULT_TOL = Tolerances()


def sub(a: Point, b: Point) -> Point:
    return (a[0] - b[0], a[1] - b[1])


def add(a: Point, b: Point) -> Point:
    return (a[0] + b[0], a[1] + b[1])


def scale(a: Point, s: float) -> Point:
    return (a[0] * s, a[1] * s)


def dot(a: Point, b: Point) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: Point, b: Point) -> float:
    return a[0] * b[1] - a[1] * b[0]


def norm(a: Point) -> float:
    return math.hypot(a[0], a[1])


def dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def unit(a: Point) -> Point:
    n = math.hypot(a[0], a[1])
    if n == 0.0:
        raise GeometryError("zero-length vector has no direction")
    return (a[0] / n, a[1] / n)


def perp(a: Point) -> Point:
    """Rotate by +90 degrees."""
    return (-a[1], a[0])


def rotate(a: Point, angle: float) -> Point:
    c, s = math.cos(angle), math.sin(angle)
    return (c * a[0] - s * a[1], s * a[0] + c * a[1])


def orient(a: Point, b: Point, c: Point) -> float:
    """Twice the signed area of triangle abc (positive for a left turn)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


class Hull(NamedTuple):
    vertices: list[Point]
    degenerate: bool


def convex_hull(points: Sequence[Point], eps: float = DEFAULT_TOL.eps_geom) -> Hull:
    """Strictly convex hull, counter-clockwise, via Andrew's monotone chain.

    A vertex survives only if it stands more than ``eps`` off the chord of its
    neighbours (cross product over longest side), so only interior angles
    below 180 degrees remain. Fewer than three points, or all points on a
    line, give a degenerate hull holding the two extremes.
    """
    if not points:
        raise GeometryError("no points")
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return Hull(pts, len(pts) < 3)

    eps2 = eps * eps
    ys = [p[1] for p in pts]
    span = (pts[-1][0] - pts[0][0]) ** 2 + (max(ys) - min(ys)) ** 2
    sure = eps2 * span  # no side is longer than the bounding-box diagonal

    # each chain only needs the points on its side of the extremes' chord
    (x0, y0), (x1, y1) = pts[0], pts[-1]
    dx, dy = x1 - x0, y1 - y0
    below, above = [pts[0]], []
    for p in pts[1:-1]:
        o = dx * (p[1] - y0) - dy * (p[0] - x0)
        if o <= 0.0:
            below.append(p)
        if o >= 0.0:
            above.append(p)
    below.append(pts[-1])
    above = [pts[-1], *reversed(above), pts[0]]

    def chain(seq):
        # pop while out[-2], out[-1], p fail to turn left by more than eps in
        # height, i.e. cross <= eps * longest side (compared squared)
        out: list = [None] * len(seq)
        k = 0
        for p in seq:
            px, py = p
            while k >= 2:
                ax, ay = out[k - 2]
                bx, by = out[k - 1]
                ux, uy, vx, vy = bx - ax, by - ay, px - ax, py - ay
                o = ux * vy - uy * vx
                if o > 0.0:
                    oo = o * o
                    if oo > sure:
                        break
                    wx, wy = px - bx, py - by
                    if oo > eps2 * (ux * ux + uy * uy) and oo > eps2 * (vx * vx + vy * vy) and oo > eps2 * (wx * wx + wy * wy):
                        break
                k -= 1
            out[k] = p
            k += 1
        return out[:k]

    lower = chain(below)
    upper = chain(above)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return Hull([pts[0], pts[-1]], True)
    return Hull(hull, False)


def exterior_bisector(prev: Point, v: Point, nxt: Point, eps: float = DEFAULT_TOL.eps_geom) -> Point:
    """Unit direction halving the exterior angle at corner ``v``.

    Computed as a normal of ``b - a`` (a, b the unit edge directions), which
    stays well conditioned for nearly flat corners. The side is taken away
    from ``a + b``; when that is lost in rounding the vertices are assumed to
    be listed counter-clockwise.
    """
    a = unit(sub(prev, v))
    b = unit(sub(nxt, v))
    # cross of unit vectors at rounding-noise level means a straight line or
    # a spike; any vertex the hull keeps sits far above this
    if abs(cross(a, b)) <= 1e-15 or norm(sub(b, a)) <= eps:
        raise GeometryError("degenerate corner")
    d = unit(sub(b, a))
    out = (d[1], -d[0])
    inward = (a[0] + b[0], a[1] + b[1])
    if norm(inward) > 1e-12 and dot(out, inward) > 0:
        out = (-out[0], -out[1])
    return out


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ab = sub(b, a)
    denom = dot(ab, ab)
    if denom == 0.0:
        raise GeometryError("segment endpoints coincide")
    t = dot(sub(p, a), ab) / denom
    t = min(1.0, max(0.0, t))
    return dist(p, (a[0] + t * ab[0], a[1] + t * ab[1]))


def moving_points_min_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> float:
    """Closest approach of two points moving linearly over t in [0, 1]."""
    d0 = sub(b0, a0)
    dv = (b1[0] - b0[0] - (a1[0] - a0[0]), b1[1] - b0[1] - (a1[1] - a0[1]))
    vv = dot(dv, dv)
    t = 0.0 if vv == 0.0 else min(1.0, max(0.0, -dot(d0, dv) / vv))
    return math.hypot(d0[0] + t * dv[0], d0[1] + t * dv[1])


def centroid(points: Sequence[Point]) -> Point:
    if not points:
        raise GeometryError("no points")
    n = len(points)
    return (math.fsum(p[0] for p in points) / n, math.fsum(p[1] for p in points) / n)


@dataclass(frozen=True)
class Similarity:
    scale: float
    rotation: float
    reflect: bool
    translation: Point

    def apply(self, p: Point) -> Point:
        x, y = p
        if self.reflect:
            y = -y
        rx, ry = rotate((x, y), self.rotation)
        return (self.scale * rx + self.translation[0], self.scale * ry + self.translation[1])


def _align_proper(src: Sequence[Point], dst: Sequence[Point]) -> Similarity:
    # closed-form 2D Umeyama: treat points as complex numbers
    cs, cd = centroid(src), centroid(dst)
    sxx = sxy = ss = 0.0
    for p, q in zip(src, dst):
        px, py = p[0] - cs[0], p[1] - cs[1]
        qx, qy = q[0] - cd[0], q[1] - cd[1]
        sxx += px * qx + py * qy
        sxy += px * qy - py * qx
        ss += px * px + py * py
    if ss == 0.0:
        if any(dist(q, cd) > 0.0 for q in dst):
            raise GeometryError("degenerate alignment")
        return Similarity(1.0, 0.0, False, sub(cd, cs))
    rotation = math.atan2(sxy, sxx)
    s = math.hypot(sxx, sxy) / ss
    rc = rotate(cs, rotation)
    return Similarity(s, rotation, False, (cd[0] - s * rc[0], cd[1] - s * rc[1]))


def similarity_align(
    source: Sequence[Point], target: Sequence[Point], allow_reflection: bool = True
) -> tuple[Similarity, float]:
    """Least-squares similarity mapping ``source[i]`` onto ``target[i]``.

    Returns the transform and the largest per-point residual after applying it.
    """
    if len(source) != len(target) or not source:
        raise GeometryError("source and target must be non-empty and equally long")
    candidates = [_align_proper(source, target)]
    if allow_reflection:
        flipped = [(x, -y) for x, y in source]
        t = _align_proper(flipped, target)
        candidates.append(Similarity(t.scale, t.rotation, True, t.translation))

    best = None
    for t in candidates:
        residual = max(dist(t.apply(p), q) for p, q in zip(source, target))
        if best is None or residual < best[1]:
            best = (t, residual)
    return best
