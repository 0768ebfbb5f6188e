"""Target patterns: validation, canonical order, scaled placement, matching."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .geom import DEFAULT_TOL, GeometryError, Point, dist, similarity_align

DEFAULT_SCALE = 5.0
ANCHOR_OFFSET = 100.0


class PatternError(ValueError):
    pass


def order_canonical(points: Sequence[Point]) -> list[Point]:
    """Left to right, ties broken top to bottom."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(set(pts)) != len(pts):
        raise PatternError("pattern duplicate")
    return sorted(pts, key=lambda p: (p[0], -p[1]))


@dataclass(frozen=True)
class TargetPattern:
    points: tuple[Point, ...]

    def __post_init__(self):
        if not self.points:
            raise PatternError("pattern is empty")
        for p in self.points:
            if not all(math.isfinite(c) for c in p):
                raise PatternError("pattern point not finite")
        pts = order_canonical(self.points)
        for a, b in itertools.combinations(pts, 2):
            if dist(a, b) < 1 - DEFAULT_TOL.eps_geom:
                raise PatternError("pattern points closer than one robot diameter")
        object.__setattr__(self, "points", tuple(pts))

    @property
    def k(self) -> int:
        return len(self.points)

    @classmethod
    def from_list(cls, pairs) -> TargetPattern:
        return cls(tuple((float(x), float(y)) for x, y in pairs))


@dataclass(frozen=True)
class ScaledPlacement:
    world_targets: tuple[Point, ...]
    scale: float
    anchor: Point


def scaled_placement(
    p: TargetPattern, x_min: float, y_max: float, scale: float = DEFAULT_SCALE
) -> ScaledPlacement:
    """Scale about the last canonical point and pin it to the anchor corner."""
    anchor = (x_min - ANCHOR_OFFSET, y_max + ANCHOR_OFFSET)
    lx, ly = p.points[-1]
    targets = tuple((anchor[0] + scale * (x - lx), anchor[1] + scale * (y - ly)) for x, y in p.points)
    return ScaledPlacement(targets, scale, anchor)


def _matches(final: Sequence[Point], pattern: Sequence[Point], tol: float) -> bool:
    try:
        _, residual = similarity_align(pattern, final)
    except GeometryError:
        return False
    return residual <= tol


def pattern_achieved(
    final_positions: Sequence[Point],
    p: TargetPattern,
    tol: float = 1e-6,
    placed: Sequence[int] | None = None,
) -> bool:
    """True if some k robots form the pattern up to similarity.

    ``placed`` gives the robot indices that occupy the canonical pattern
    points in order. Without it, every pair of robots is tried as the image of
    the first two pattern points and the rest are matched by nearest robot.
    """
    k = p.k
    if len(final_positions) < k:
        return False
    if placed is not None:
        if len(placed) != k:
            return False
        return _matches([final_positions[i] for i in placed], p.points, tol)
    if k == 1:
        return True

    pts = list(final_positions)
    p0, p1 = p.points[0], p.points[1]
    for i, j in itertools.permutations(range(len(pts)), 2):
        for reflect in (False, True):
            t = _two_point_similarity(p0, p1, pts[i], pts[j], reflect)
            chosen = []
            for q in p.points:
                img = t(q)
                best = min(range(len(pts)), key=lambda m: dist(pts[m], img))
                if dist(pts[best], img) > 10 * tol + 1e-9 or best in chosen:
                    break
                chosen.append(best)
            else:
                if _matches([pts[m] for m in chosen], p.points, tol):
                    return True
    return False


def _two_point_similarity(s0: Point, s1: Point, d0: Point, d1: Point, reflect: bool):
    def flip(q):
        return (q[0], -q[1]) if reflect else q

    a0, a1 = complex(*flip(s0)), complex(*flip(s1))
    b0, b1 = complex(*d0), complex(*d1)
    m = (b1 - b0) / (a1 - a0)

    def apply(q):
        z = b0 + m * (complex(*flip(q)) - a0)
        return (z.real, z.imag)

    return apply
