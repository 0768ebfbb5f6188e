"""Per-robot algorithm: a pure map from (snapshot, memory, coin) to a move.

Every coordinate a robot sees or stores is egocentric in its own private
frame. Points kept in memory are shifted by the robot's own displacement after
each move (the robot knows how far it went in its own frame), so they stay
valid without any shared reference.

The three phases run in sequence:

* mutual visibility: expand the hull until every robot is a strict corner,
  with a ``4k + 2`` countdown guarding against a single occluded view;
* leader election: competitors on the enclosing circle flip ``1/k`` coins and
  losers step inside until exactly one remains on the circle;
* pattern formation: the leader walks each follower into its scaled pattern
  slot by demonstrating a direction (touching it) and a distance (its own
  displacement).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import NamedTuple, Sequence

from . import geom
from .geom import DEFAULT_TOL, Point, Tolerances, add, dist, norm, scale, sub, unit
from .pattern import DEFAULT_SCALE, TargetPattern
from .visibility import Snapshot, observed_hull

ORIGIN: Point = (0.0, 0.0)

# Pattern-formation layout, in the leader's work frame with the anchor of the
# scaled pattern at (0, 0): the hull's leftmost x is 100, followers travel
# down a corridor at x = 10 (a lane at x = 5 for short vertical hops) and the
# leader returns along a highway just left of the hull.
X_MIN = 100.0
X_CORRIDOR = X_MIN - 90.0
X_DIAGONAL = X_MIN - 95.0
X_HIGHWAY = X_MIN - 2.0
DETACH_DROP = 2.0
EXIT_MARGIN = 2.0
EXIT_CLEARANCE = 1.01
CONE_HALF_WIDTH = 1e-3
WAYPOINT_TOL = 1e-7


class Phase(enum.IntEnum):
    MUTUAL_VISIBILITY = 0
    LEADER_ELECTION = 1
    PATTERN_FORMATION = 2
    DONE = 3


class LEStage(enum.IntEnum):
    IDLE = 0  # not competing
    FLIP = 1
    EVALUATE = 2


class PFStage(enum.IntEnum):
    EXIT = 0
    TRANSIT = 1
    LEG = 2
    FINAL = 3


class FollowKind(enum.IntEnum):
    IDLE = 0
    ARMED = 1
    READY = 2


class FollowState(NamedTuple):
    kind: FollowKind
    dir: Point | None = None
    dist: float | None = None


FOLLOW_IDLE = FollowState(FollowKind.IDLE)


@dataclass(frozen=True)
class Memory:
    """Fixed slot record carried by one robot between rounds.

    ``saved_pos`` holds the return point of a retreated competitor during
    leader election, and the leader's current follower during pattern
    formation. ``circle_center``/``circle_radius`` hold the election circle.
    """

    phase: Phase = Phase.MUTUAL_VISIBILITY
    mv_counter: int | None = None
    mv_k: int | None = None
    n_total: int | None = None
    le_stage: LEStage | None = None
    saved_pos: Point | None = None
    circle_center: Point | None = None
    circle_radius: float | None = None
    is_leader: bool | None = None
    work_turns: int | None = None
    anchor: Point | None = None
    pf_stage: PFStage | None = None
    pf_step: int | None = None
    placed_count: int | None = None
    follow_state: FollowState | None = None
    had_adjacent_prev: bool | None = None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, FollowState):
                v = [int(v.kind), list(v.dir) if v.dir else None, v.dist]
            elif isinstance(v, enum.Enum):
                v = v.name
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


POINT_SLOTS = ("saved_pos", "circle_center", "anchor")


@dataclass(frozen=True)
class Program:
    """Inputs every robot is given: the target pattern and constants."""

    pattern: TargetPattern
    scale_factor: float = DEFAULT_SCALE
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        if self.scale_factor < 3:
            raise ValueError("scale factor must be at least 3 to keep the detach drop safe")


class Motion(NamedTuple):
    target: Point = ORIGIN


STAY = Motion()


class LeaderError(RuntimeError):
    pass


def compute(s: Snapshot, m: Memory, rng, program: Program) -> tuple[Motion, Memory]:
    """One Compute step for any phase, followed by dead reckoning of memory."""
    if m.phase == Phase.MUTUAL_VISIBILITY:
        motion, m = mv_step(s, m, program)
    elif m.phase == Phase.LEADER_ELECTION:
        motion, m = le_step(s, m, rng, program.tol)
    elif m.phase == Phase.PATTERN_FORMATION:
        if m.is_leader:
            motion, m = pf_leader_step(s, m, program)
        else:
            motion, m = pf_follower_step(s, m, program.tol)
    else:
        motion = STAY
    tx, ty = motion.target
    if not (math.isfinite(tx) and math.isfinite(ty)):
        return motion, m
    if motion.target != ORIGIN:
        shifted = {k: sub(getattr(m, k), motion.target) for k in POINT_SLOTS if getattr(m, k) is not None}
        if shifted:
            m = replace(m, **shifted)
    return motion, m


# ---------------------------------------------------------------------------
# Mutual visibility
# ---------------------------------------------------------------------------


def _path_clear(target: Point, others: Sequence[Point], tol: Tolerances) -> bool:
    if target == ORIGIN:
        return True
    return all(geom.point_segment_distance(q, ORIGIN, target) >= 1 - tol.eps_geom for q in others)


def _corner_motion(hull: Sequence[Point], tol: Tolerances) -> Point:
    if len(hull) == 1:
        return ORIGIN
    if len(hull) == 2:
        other = hull[0] if hull[1] == ORIGIN else hull[1]
        return scale(unit(sub(ORIGIN, other)), 1.0)
    i = hull.index(ORIGIN)
    return geom.exterior_bisector(hull[i - 1], ORIGIN, hull[(i + 1) % len(hull)], tol.eps_geom)


def _degenerate_motion(hull: Sequence[Point], others: Sequence[Point], tol: Tolerances) -> Point:
    d = unit(sub(hull[1], hull[0]))
    n = geom.perp(d)
    if n[1] < 0 or (n[1] == 0 and n[0] < 0):
        n = (-n[0], -n[1])
    return n if _path_clear(n, others, tol) else ORIGIN


def _interior_motion(hull: Sequence[Point], others: Sequence[Point], tol: Tolerances) -> Point:
    eps = tol.eps_geom
    corners = set(hull)
    # only robots still inside the hull compete for an edge
    rivals = [q for q in others if q not in corners]
    cands = []
    for i in range(len(hull)):
        e0, e1 = hull[i], hull[(i + 1) % len(hull)]
        length = dist(e0, e1)
        if length >= 3.0:
            cands.append((geom.point_segment_distance(ORIGIN, e0, e1), i, length))
    cands.sort()
    # nearest long edge with no rival strictly closer to it
    best = None
    for mine, i, length in cands:
        e0, e1 = hull[i], hull[(i + 1) % len(hull)]
        if not any(geom.point_segment_distance(q, e0, e1) < mine - eps for q in rivals):
            best = (mine, i, length)
            break
    if best is None:
        return ORIGIN
    mine, i, length = best
    e0, e1 = hull[i], hull[(i + 1) % len(hull)]
    u = scale(sub(e1, e0), 1.0 / length)
    along = geom.dot(sub(ORIGIN, e0), u)
    if along < 1.0 + eps or along > length - 1.0 - eps:
        return ORIGIN
    # tied robots (a flat row on the edge, say) would all step out together
    # and stay collinear; only those nearest an end of the edge go
    my_end = min(along, length - along)
    for q in rivals:
        if abs(geom.point_segment_distance(q, e0, e1) - mine) > eps:
            continue
        aq = geom.dot(sub(q, e0), u)
        if abs(aq - along) < 1.0 - eps:
            return ORIGIN  # overlapping lanes: both wait
        if min(aq, length - aq) < my_end - eps:
            return ORIGIN
    outward = (u[1], -u[0])  # hull is counter-clockwise
    target = scale(outward, _exit_depth(hull, i, outward, tol))
    return target if _path_clear(target, others, tol) else ORIGIN


def _exit_depth(hull: Sequence[Point], i: int, outward: Point, tol: Tolerances) -> float:
    """How far to travel along ``outward`` to end one unit outside edge ``i``.

    The edge's corners expand in the same round, so the unit is measured from
    where the edge will be. Measuring from where it is would land the robot
    level with corners on a flat stretch of hull, where it would still not be
    a strict vertex and would chase the edge round after round.
    """
    m = len(hull)
    e0, e1 = hull[i], hull[(i + 1) % m]
    try:
        f0 = add(e0, geom.exterior_bisector(hull[i - 1], e0, e1, tol.eps_geom))
        f1 = add(e1, geom.exterior_bisector(e0, e1, hull[(i + 2) % m], tol.eps_geom))
        d = unit(sub(f1, f0))
    except geom.GeometryError:
        f0, d = e0, unit(sub(e1, e0))
    n_new = (d[1], -d[0])
    c = geom.dot(outward, n_new)
    if c < 0.5:  # edge would swing too far to trust the prediction
        f0, c, n_new = e0, 1.0, outward
    return (1.0 + geom.dot(f0, n_new)) / c


def mv_step(s: Snapshot, m: Memory, program: Program) -> tuple[Motion, Memory]:
    tol = program.tol
    others = list(s.visible)
    # strict-hull test already excludes collinear triples, so skip the cubic scan
    obs = observed_hull(s, tol, check_collinear=False)
    hull = obs.vertices
    n_seen = len(others) + 1
    k = len(hull)
    convex_now = k == n_seen

    counter, mv_k = m.mv_counter, m.mv_k
    if counter is not None and k > mv_k:
        counter = mv_k = None
    phase, n_total = m.phase, m.n_total
    if counter is None:
        if convex_now and obs.self_class == "corner":
            counter, mv_k = 4 * k + 2, k
    else:
        counter -= 1
        if counter == 0:
            counter = mv_k = None
            n_total = n_seen
            phase = Phase.LEADER_ELECTION
            if program.pattern.k > n_total:
                phase = Phase.DONE

    if obs.self_class == "corner":
        target = _corner_motion(hull, tol)
    elif obs.self_class == "degenerate":
        target = _degenerate_motion(hull, others, tol)
    else:
        target = _interior_motion(hull, others, tol)
    if (phase, counter, mv_k, n_total) != (m.phase, m.mv_counter, m.mv_k, m.n_total):
        m = replace(m, phase=phase, mv_counter=counter, mv_k=mv_k, n_total=n_total)
    return Motion(target), m


# ---------------------------------------------------------------------------
# Leader election
# ---------------------------------------------------------------------------


def _on_circle(p: Point, c: Point, r: float, tol: Tolerances) -> bool:
    return abs(dist(p, c) - r) <= tol.eps_geom * (1 + r)


def _retreat_depth(pts: Sequence[Point], c: Point, tol: Tolerances) -> float:
    hull = geom.convex_hull(pts, tol.eps_geom).vertices
    if len(hull) >= 3 and ORIGIN in hull:
        i = hull.index(ORIGIN)
        a, b = hull[i - 1], hull[(i + 1) % len(hull)]
        sagitta = abs(geom.orient(a, b, ORIGIN)) / dist(a, b)
        depth = min(0.5, sagitta / 2)
    else:
        depth = min(0.5, dist(ORIGIN, c) / 2)
    return max(depth, tol.eps_geom)


def le_step(s: Snapshot, m: Memory, rng, tol: Tolerances = DEFAULT_TOL) -> tuple[Motion, Memory]:
    pts = [ORIGIN, *s.visible]
    if m.circle_center is None:
        hull = geom.convex_hull(pts, tol.eps_geom).vertices
        c = geom.centroid(hull)
        r = max(dist(p, c) for p in pts)
        stage = LEStage.FLIP if _on_circle(ORIGIN, c, r, tol) else LEStage.IDLE
        m = replace(m, circle_center=c, circle_radius=r, le_stage=stage)
    c, r = m.circle_center, m.circle_radius

    boundary = [p for p in pts if _on_circle(p, c, r, tol)]
    if len(boundary) == 1:
        return STAY, replace(
            m,
            phase=Phase.PATTERN_FORMATION,
            is_leader=boundary[0] == ORIGIN,
            le_stage=None,
            saved_pos=None,
        )

    if m.le_stage == LEStage.FLIP:
        if rng.random() < 1.0 / max(len(boundary), 1):
            return STAY, replace(m, le_stage=LEStage.EVALUATE)
        inward = unit(sub(c, ORIGIN))
        depth = _retreat_depth(pts, c, tol)
        target = scale(inward, depth)
        while depth > tol.eps_geom and any(dist(q, target) < tol.clearance for q in s.visible):
            depth /= 2
            target = scale(inward, depth)
        if depth <= tol.eps_geom:
            return STAY, replace(m, le_stage=LEStage.EVALUATE)
        return Motion(target), replace(m, le_stage=LEStage.EVALUATE, saved_pos=ORIGIN)

    if m.le_stage == LEStage.EVALUATE:
        back = m.saved_pos
        m = replace(m, le_stage=LEStage.FLIP, saved_pos=None)
        return (Motion(back) if back is not None else STAY), m

    return STAY, m


# ---------------------------------------------------------------------------
# Pattern formation: leader
# ---------------------------------------------------------------------------


def _quarter(p: Point, turns: int) -> Point:
    x, y = p
    for _ in range(turns % 4):
        x, y = -y, x
    return (x, y)


class _Work:
    """Leader's work frame: quarter-turned, anchored at the pattern's last point."""

    def __init__(self, turns: int, anchor_ego: Point):
        self.turns = turns
        self.anchor = anchor_ego

    def to_work(self, p: Point) -> Point:
        return _quarter(sub(p, self.anchor), self.turns)

    def to_ego(self, w: Point) -> Point:
        return add(_quarter(w, -self.turns), self.anchor)


def _empty_quadrant_turns(pts: Sequence[Point], eps: float) -> int:
    for turns in range(4):
        if not any(q[0] < -eps and q[1] > eps for q in (_quarter(p, turns) for p in pts)):
            return turns
    raise LeaderError("impossible: leader not a hull corner")


def _follower_route(start: Point, slot: Point) -> list[Point]:
    """Waypoints of a follower from the hull to its pattern slot."""
    route = [start, (X_CORRIDOR, start[1])]
    dy = slot[1] - start[1]
    if abs(dy) <= 1e-9:
        pass
    elif abs(dy) >= 1.0:
        route.append((X_CORRIDOR, slot[1]))
    else:
        # a short vertical leg would leave no room to clear the leader
        route.append((X_DIAGONAL, slot[1]))
    route.append(slot)
    return route


def _close(a: Point, b: Point) -> bool:
    return dist(a, b) <= WAYPOINT_TOL


def pattern_slots(program: Program) -> list[Point]:
    """Scaled pattern in work coordinates (last canonical point at the origin)."""
    pts = program.pattern.points
    lx, ly = pts[-1]
    f = program.scale_factor
    return [(f * (x - lx), f * (y - ly)) for x, y in pts]


def _placements(program: Program, n_total: int) -> int:
    k = program.pattern.k
    return k - 1 if k == n_total else k


def pf_leader_step(s: Snapshot, m: Memory, program: Program) -> tuple[Motion, Memory]:
    tol = program.tol
    if m.pf_stage is None:
        if program.pattern.k > (m.n_total or 0):
            return STAY, replace(m, phase=Phase.DONE)
        pts = [ORIGIN, *s.visible]
        turns = _empty_quadrant_turns(pts, tol.eps_geom)
        rotated = [_quarter(p, turns) for p in pts]
        x_min = min(p[0] for p in rotated)
        y_max = max(p[1] for p in rotated)
        anchor = _quarter((x_min - X_MIN, y_max + X_MIN), -turns)
        m = replace(m, work_turns=turns, anchor=anchor, pf_stage=PFStage.EXIT, pf_step=0, placed_count=0)

    work = _Work(m.work_turns, m.anchor)
    me = work.to_work(ORIGIN)

    def go(w: Point, **changes):
        return Motion(work.to_ego(w)), replace(m, **changes)

    if m.pf_stage == PFStage.EXIT:
        c = work.to_work(m.circle_center)
        rho = m.circle_radius + EXIT_MARGIN
        if m.pf_step == 0:
            out = unit(sub(me, c)) if dist(me, c) > tol.eps_geom else (-1.0, 0.0)
            return go(add(c, scale(out, rho)), pf_step=1)
        theta = math.atan2(me[1] - c[1], me[0] - c[0])
        delta = math.remainder(math.pi - theta, 2 * math.pi)
        if abs(delta) > 1e-9:
            step_max = 2 * math.acos((m.circle_radius + EXIT_CLEARANCE) / rho) * 0.999
            step = math.copysign(min(abs(delta), step_max), delta)
            return go((c[0] + rho * math.cos(theta + step), c[1] + rho * math.sin(theta + step)))
        m = _next_target(m, program)

    if m.pf_stage == PFStage.TRANSIT:
        if m.saved_pos is None:
            m = replace(m, saved_pos=_pick_follower(s, work))
        f = work.to_work(m.saved_pos)
        approach = (f[0] - 1.0, f[1])
        if abs(me[0] - X_HIGHWAY) > WAYPOINT_TOL:
            return go((X_HIGHWAY, me[1]))
        if abs(me[1] - approach[1]) > WAYPOINT_TOL:
            return go((X_HIGHWAY, approach[1]))
        return go(approach, pf_stage=PFStage.LEG, pf_step=0)

    if m.pf_stage == PFStage.LEG:
        slot = pattern_slots(program)[m.placed_count]
        route = _follower_route(work.to_work(m.saved_pos), slot)
        leg, sub_step = divmod(m.pf_step, 3)
        f, t = route[leg], route[leg + 1]
        d = dist(f, t)
        u = scale(sub(t, f), 1.0 / d)
        if sub_step == 0:
            return go(add(f, scale(u, d + 1.0)), pf_step=m.pf_step + 1)
        if sub_step == 1:
            if leg + 2 < len(route):
                nxt = unit(sub(route[leg + 2], t))
                station = add(t, nxt)
            else:
                station = (slot[0], slot[1] - DETACH_DROP)
            return go(station, pf_step=m.pf_step + 1)
        # follower moves this round
        if leg + 2 < len(route):
            return STAY, replace(m, pf_step=m.pf_step + 1)
        m = replace(m, placed_count=m.placed_count + 1, saved_pos=None)
        return STAY, _next_target(m, program)

    if m.pf_stage == PFStage.FINAL:
        slot = pattern_slots(program)[-1]
        full = program.pattern.k == m.n_total
        if m.pf_step == 0 and abs(me[0] - X_CORRIDOR) > WAYPOINT_TOL:
            if full:
                return go((X_CORRIDOR, me[1]), pf_step=1)
            return go((X_CORRIDOR, me[1]), phase=Phase.DONE)
        if not full:
            return STAY, replace(m, phase=Phase.DONE)
        if abs(me[1] - slot[1]) > WAYPOINT_TOL:
            return go((X_CORRIDOR, slot[1]), pf_step=2)
        return go(slot, phase=Phase.DONE)

    return STAY, m


def _next_target(m: Memory, program: Program) -> Memory:
    if m.placed_count < _placements(program, m.n_total):
        return replace(m, pf_stage=PFStage.TRANSIT, pf_step=0, saved_pos=None)
    return replace(m, pf_stage=PFStage.FINAL, pf_step=0)


def _pick_follower(s: Snapshot, work: _Work) -> Point:
    """Leftmost, then topmost, robot still on the hull side of the plane."""
    best = None
    for q in s.visible:
        w = work.to_work(q)
        if w[0] < X_MIN - 0.5:
            continue
        key = (w[0], -w[1])
        if best is None or key < best[0]:
            best = (key, q)
    if best is None:
        raise LeaderError("no robot left to place")
    return best[1]


# ---------------------------------------------------------------------------
# Pattern formation: followers
# ---------------------------------------------------------------------------


def pf_follower_step(s: Snapshot, m: Memory, tol: Tolerances = DEFAULT_TOL) -> tuple[Motion, Memory]:
    others = s.visible
    adjacent = [q for q in others if norm(q) <= 1 + tol.eps_adj]
    fs = m.follow_state or FOLLOW_IDLE
    motion = STAY

    if m.had_adjacent_prev is None:
        pass  # first look of the phase: existing contacts are not instructions
    elif fs.kind == FollowKind.IDLE:
        if adjacent and not m.had_adjacent_prev:
            nearest = min(adjacent, key=norm)
            fs = FollowState(FollowKind.ARMED, unit(nearest))
    elif fs.kind == FollowKind.ARMED:
        cos_w = math.cos(CONE_HALF_WIDTH)
        ahead = [q for q in others if geom.dot(q, fs.dir) >= cos_w * norm(q)]
        if not ahead:
            fs = FOLLOW_IDLE
        else:
            mark = min(ahead, key=norm)
            gap = norm(mark)
            if gap > 1 + tol.eps_adj:
                # re-aim at the far robot: a bearing read at distance 1 is
                # too coarse to steer a long move
                fs = FollowState(FollowKind.READY, unit(mark), gap - 1.0)
    elif fs.kind == FollowKind.READY:
        target = scale(fs.dir, fs.dist)
        if _path_clear(target, others, tol):
            motion = Motion(target)
            fs = FOLLOW_IDLE

    return motion, replace(m, follow_state=fs, had_adjacent_prev=bool(adjacent))
