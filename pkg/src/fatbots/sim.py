"""Fully synchronous Look-Compute-Move round engine with collision auditing.

Every round all robots look at the same pre-move world, compute from their own
snapshot and memory, and then move simultaneously along straight lines at
constant speed. Robots are processed by index, which fixes the floating-point
evaluation order and makes traces reproducible byte for byte.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geom
from .geom import DEFAULT_TOL, Point, Tolerances
from .pattern import DEFAULT_SCALE, PatternError, TargetPattern, pattern_achieved
from .robot import LEStage, LeaderError, Memory, Phase, Program, compute
from .visibility import Frame, InvalidConfiguration, Snapshot, VisibilityCache, visibility_matrix

log = logging.getLogger(__name__)

TRACE_VERSION = 1


class Status(str, enum.Enum):
    PATTERN_FORMED = "PatternFormed"
    INFEASIBLE = "Infeasible"
    ROUND_LIMIT = "RoundLimit"
    COLLISION = "CollisionDetected"
    INTERNAL_ERROR = "InternalError"
    # harness-only: the run was asked to stop once a phase was over
    PHASE_COMPLETE = "PhaseComplete"


class CollisionDetected(RuntimeError):
    pass


@dataclass
class SimConfig:
    tol: Tolerances = DEFAULT_TOL
    scale_factor: float = DEFAULT_SCALE
    round_limit: int | None = None
    # start every robot in this phase (harness use: skip earlier phases)
    start_phase: Phase = Phase.MUTUAL_VISIBILITY
    # stop as soon as no robot remains in this phase
    stop_after: Phase | None = None
    record_memory: bool = False

    def limit_for(self, n: int) -> int:
        return self.round_limit if self.round_limit is not None else 200 * n + 1000


@dataclass
class Scenario:
    positions: list[Point]
    pattern: TargetPattern
    seed: int = 0
    # None means draw frames from the seed
    frames: list[Frame] | None = None

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass
class WorldState:
    positions: list[Point]
    frames: list[Frame]
    memories: list[Memory]
    round: int = 0


@dataclass
class RoundRecord:
    round: int
    before: list[Point]
    after: list[Point]
    phases: list[int]
    events: list[dict]
    min_motion_distance: float
    memories: list[dict] | None = None

    def to_json(self) -> dict:
        out = {
            "kind": "round",
            "round": self.round,
            "before": [list(p) for p in self.before],
            "after": [list(p) for p in self.after],
            "phases": self.phases,
            "events": self.events,
            "min_motion_distance": self.min_motion_distance,
        }
        if self.memories is not None:
            out["memories"] = self.memories
        return out


@dataclass
class RunOutcome:
    status: Status
    total_rounds: int
    mv_rounds: int = 0
    le_rounds: int = 0
    pf_rounds: int = 0
    le_iterations: int = 0
    leader: int | None = None
    placed: list[int] = field(default_factory=list)
    message: str = ""

    def to_json(self) -> dict:
        return {
            "kind": "outcome",
            "status": self.status.value,
            "total_rounds": self.total_rounds,
            "mv_rounds": self.mv_rounds,
            "le_rounds": self.le_rounds,
            "pf_rounds": self.pf_rounds,
            "le_iterations": self.le_iterations,
            "leader": self.leader,
            "placed": self.placed,
            "message": self.message,
        }


@dataclass
class Trace:
    header: dict
    rounds: list[RoundRecord] = field(default_factory=list)
    outcome: RunOutcome | None = None
    final_memories: list[Memory] | None = None

    def lines(self) -> Iterable[str]:
        yield json.dumps(self.header)
        for r in self.rounds:
            yield json.dumps(r.to_json())
        if self.outcome is not None:
            yield json.dumps(self.outcome.to_json())

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def validate_scenario(positions, pattern, config: SimConfig | None = None) -> list[str]:
    """Collect problems with a scenario; never raises."""
    config = config or SimConfig()
    out = []
    pts = []
    try:
        pts = [(float(x), float(y)) for x, y in positions]
    except (TypeError, ValueError):
        return ["positions malformed"]
    if not pts:
        out.append("no robots")
    for i, p in enumerate(pts):
        if not all(math.isfinite(c) for c in p):
            out.append(f"robot {i} not finite")
    finite = [p for p in pts if all(math.isfinite(c) for c in p)]
    for (i, a), (j, b) in itertools.combinations(enumerate(finite), 2):
        if geom.dist(a, b) < 1 - config.tol.eps_geom:
            out.append(f"overlap: robots {i} and {j} at distance {geom.dist(a, b):.6g}")
    if isinstance(pattern, TargetPattern):
        pass
    else:
        try:
            raw = [(float(x), float(y)) for x, y in pattern]
        except (TypeError, ValueError):
            return out + ["pattern malformed"]
        if len(set(raw)) != len(raw):
            out.append("pattern duplicate")
        else:
            try:
                TargetPattern.from_list(raw)
            except PatternError as e:
                out.append(f"pattern invalid: {e}")
    if config.scale_factor < 3:
        out.append("scale factor below 3")
    return out


def frames_for(scenario: Scenario) -> list[Frame]:
    if scenario.frames is not None:
        return list(scenario.frames)
    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed).spawn(scenario.n + 1)[-1])
    out = []
    for _ in range(scenario.n):
        rot = float(rng.uniform(0.0, 2 * math.pi))
        out.append(Frame(rot, bool(rng.random() < 0.5)))
    return out


def robot_rngs(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n + 1)[:n]
    return [np.random.default_rng(c) for c in children]


def initial_state(scenario: Scenario, config: SimConfig) -> WorldState:
    mem = Memory(phase=config.start_phase)
    if config.start_phase > Phase.MUTUAL_VISIBILITY:
        mem = replace(mem, n_total=scenario.n)
    return WorldState(list(scenario.positions), frames_for(scenario), [mem] * scenario.n, 0)


def motion_min_distance(before: Sequence[Point], after: Sequence[Point]) -> tuple[float, tuple[int, int] | None]:
    """Smallest pairwise distance over the round under linear motion."""
    a0 = np.asarray(before, dtype=float).reshape(-1, 2)
    a1 = np.asarray(after, dtype=float).reshape(-1, 2)
    n = len(a0)
    if n < 2:
        return math.inf, None
    i, j = np.triu_indices(n, 1)
    d0 = a0[j] - a0[i]
    dv = (a1[j] - a0[j]) - (a1[i] - a0[i])
    vv = (dv**2).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(vv > 0, np.clip(-(d0 * dv).sum(-1) / vv, 0.0, 1.0), 0.0)
    d = np.sqrt(((d0 + t[:, None] * dv) ** 2).sum(-1))
    k = int(np.argmin(d))
    return float(d[k]), (int(i[k]), int(j[k]))


def _events(i: int, old: Memory, new: Memory) -> list[dict]:
    ev = []

    def add(name, **extra):
        ev.append({"robot": i, "event": name, **extra})

    if new.mv_counter is not None and (old.mv_counter is None or new.mv_counter > old.mv_counter):
        add("counter_started", value=new.mv_counter, k=new.mv_k)
    if old.mv_counter is not None and new.mv_counter is None and new.phase == old.phase:
        add("counter_cleared")
    if old.phase != new.phase:
        add("phase", to=new.phase.name)
    if old.le_stage == LEStage.FLIP and new.le_stage == LEStage.EVALUATE:
        add("coin_flip", retreated=new.saved_pos is not None)
    if new.is_leader and not old.is_leader:
        add("leader_elected")
    if (new.placed_count or 0) > (old.placed_count or 0):
        add("placed", count=new.placed_count)
    return ev


def _local_views(pts: np.ndarray, vis: np.ndarray, frames: Sequence[Frame]) -> list[tuple[Point, ...]]:
    """Each robot's visible positions in its egocentric frame (matches Frame.to_local)."""
    x, y = pts[:, 0], pts[:, 1]
    rx = x[None, :] - x[:, None]
    ry = y[None, :] - y[:, None]
    c = np.array([math.cos(f.rotation) for f in frames])[:, None]
    s = np.array([math.sin(f.rotation) for f in frames])[:, None]
    lx = c * rx + s * ry
    ly = -s * rx + c * ry
    flip = np.array([f.reflect for f in frames], dtype=bool)
    ly[flip] = -ly[flip]
    return [tuple(zip(lx[i, vis[i]].tolist(), ly[i, vis[i]].tolist())) for i in range(len(frames))]


class Engine:
    """Holds per-run resources (rngs, visibility memo) around the pure step."""

    def __init__(self, scenario: Scenario, config: SimConfig):
        self.scenario = scenario
        self.config = config
        self.program = Program(scenario.pattern, config.scale_factor, config.tol)
        self.rngs = robot_rngs(scenario.seed, scenario.n)
        self.cache = VisibilityCache()

    def step(self, w: WorldState) -> tuple[WorldState, RoundRecord]:
        tol = self.config.tol
        vis = visibility_matrix(w.positions, tol, self.cache)
        targets, memories, events = [], [], []
        pts = np.asarray(w.positions, dtype=float).reshape(-1, 2)
        views = _local_views(pts, vis, w.frames)
        for i, (pos, frame, mem) in enumerate(zip(w.positions, w.frames, w.memories)):
            f = frame.at(pos)
            snap = Snapshot(views[i])
            motion, new_mem = compute(snap, mem, self.rngs[i], self.program)
            tx, ty = motion.target
            if not (math.isfinite(tx) and math.isfinite(ty)):
                raise FloatingPointError(f"robot {i} produced a non-finite target")
            targets.append(f.to_world(motion.target) if motion.target != (0.0, 0.0) else pos)
            memories.append(new_mem)
            events.extend(_events(i, mem, new_mem))
        dmin, pair = motion_min_distance(w.positions, targets)
        record = RoundRecord(
            round=w.round,
            before=list(w.positions),
            after=targets,
            phases=[int(m.phase) for m in w.memories],
            events=events,
            min_motion_distance=dmin,
            memories=[m.to_dict() for m in memories] if self.config.record_memory else None,
        )
        if dmin < 1 - tol.eps_geom:
            raise CollisionDetected(f"round {w.round}: robots {pair} reach distance {dmin:.6g}")
        return WorldState(targets, w.frames, memories, w.round + 1), record


def step(w: WorldState, scenario: Scenario, config: SimConfig | None = None) -> tuple[WorldState, RoundRecord]:
    """Advance one round. Robot coins come from fresh per-robot streams seeded
    by ``scenario.seed`` and the round number, so a single call is reproducible."""
    config = config or SimConfig()
    eng = Engine(scenario, config)
    eng.rngs = [
        np.random.default_rng(np.random.SeedSequence([scenario.seed, w.round, i])) for i in range(scenario.n)
    ]
    return eng.step(w)


def _header(scenario: Scenario, config: SimConfig, frames: list[Frame]) -> dict:
    return {
        "kind": "header",
        "trace_version": TRACE_VERSION,
        "n": scenario.n,
        "seed": scenario.seed,
        "positions": [list(p) for p in scenario.positions],
        "frames": [{"rotation": f.rotation, "reflect": f.reflect} for f in frames],
        "pattern": [list(p) for p in scenario.pattern.points],
        "params": {
            "eps_geom": config.tol.eps_geom,
            "eps_adj": config.tol.eps_adj,
            "clearance": config.tol.clearance,
            "scale_factor": config.scale_factor,
            "round_limit": config.limit_for(scenario.n),
            "start_phase": config.start_phase.name,
        },
    }


def run(scenario: Scenario, config: SimConfig | None = None) -> tuple[Trace, RunOutcome]:
    config = config or SimConfig()
    violations = validate_scenario(scenario.positions, scenario.pattern, config)
    if violations:
        raise InvalidConfiguration("; ".join(violations))
    eng = Engine(scenario, config)
    w = initial_state(scenario, config)
    trace = Trace(_header(scenario, config, w.frames))
    limit = config.limit_for(scenario.n)
    counts = {Phase.MUTUAL_VISIBILITY: 0, Phase.LEADER_ELECTION: 0, Phase.PATTERN_FORMATION: 0}
    le_iterations = 0
    placed: list[int] = []
    status, message = Status.ROUND_LIMIT, ""

    while w.round < limit:
        phases = {m.phase for m in w.memories}
        for ph in counts:
            if ph in phases:
                counts[ph] += 1
        try:
            new, record = eng.step(w)
        except CollisionDetected as e:
            status, message = Status.COLLISION, str(e)
            break
        except (FloatingPointError, LeaderError, InvalidConfiguration, geom.GeometryError) as e:
            status, message = Status.INTERNAL_ERROR, f"round {w.round}: {e}"
            break
        trace.rounds.append(record)
        if any(e["event"] == "coin_flip" for e in record.events):
            le_iterations += 1
        for i, m in enumerate(w.memories):
            if m.phase == Phase.PATTERN_FORMATION and not m.is_leader and record.before[i] != record.after[i]:
                if i not in placed:
                    placed.append(i)
        w = new

        leader = _leader(w.memories)
        if leader is not None and w.memories[leader].phase == Phase.DONE:
            status = Status.PATTERN_FORMED
            break
        if all(m.phase == Phase.DONE for m in w.memories):
            status = Status.INFEASIBLE
            break
        if config.stop_after is not None and all(m.phase > config.stop_after for m in w.memories):
            status = Status.PHASE_COMPLETE
            break

    leader = _leader(w.memories)
    slots = list(placed)
    if leader is not None and scenario.pattern.k == scenario.n:
        slots.append(leader)
    if status == Status.PATTERN_FORMED and not pattern_achieved(
        w.positions, scenario.pattern, 1e-6, placed=slots
    ):
        status, message = Status.INTERNAL_ERROR, "leader finished but the pattern is not formed"

    outcome = RunOutcome(
        status=status,
        total_rounds=w.round,
        mv_rounds=counts[Phase.MUTUAL_VISIBILITY],
        le_rounds=counts[Phase.LEADER_ELECTION],
        pf_rounds=counts[Phase.PATTERN_FORMATION],
        le_iterations=le_iterations,
        leader=leader,
        placed=slots,
        message=message,
    )
    trace.outcome = outcome
    trace.final_memories = w.memories
    log.info("run finished: %s after %d rounds", status.value, w.round)
    return trace, outcome


def _leader(memories: Sequence[Memory]) -> int | None:
    for i, m in enumerate(memories):
        if m.is_leader:
            return i
    return None


@dataclass
class AuditReport:
    min_distance: float
    offending_round: int | None
    pair: tuple[int, int] | None = None

    @property
    def ok(self) -> bool:
        return self.offending_round is None


def collision_audit(trace: Trace | Iterable[RoundRecord], threshold: float = 1 - 1e-9) -> AuditReport:
    """Recompute the continuous pairwise minimum of a trace from scratch.

    Works on squared separation ``|d0 + t dv|^2`` as a quadratic in ``t``:
    its minimum over [0, 1] is at an endpoint or at the interior vertex.
    """
    rounds = trace.rounds if isinstance(trace, Trace) else list(trace)
    best, where, pair = math.inf, None, None
    for r in rounds:
        if len(r.before) != len(r.after):
            raise ValueError(f"malformed trace at round {r.round}")
        n = len(r.before)
        if n < 2:
            continue
        b = np.asarray(r.before, dtype=float).reshape(n, 2)
        a = np.asarray(r.after, dtype=float).reshape(n, 2)
        i, j = np.triu_indices(n, 1)
        d0 = b[j] - b[i]
        d1 = a[j] - a[i]
        dv = d1 - d0
        qa = (dv * dv).sum(-1)
        qb = 2 * (d0 * dv).sum(-1)
        qc = (d0 * d0).sum(-1)
        sq = np.minimum(qc, (d1 * d1).sum(-1))
        inside = (qa > 0) & (qb < 0) & (-qb < 2 * qa)
        if inside.any():
            t = -qb[inside] / (2 * qa[inside])
            sq[inside] = np.minimum(sq[inside], qc[inside] + t * (qb[inside] + t * qa[inside]))
        k = int(np.argmin(sq))
        d = math.sqrt(max(float(sq[k]), 0.0))
        if d < best:
            best, pair = d, (int(i[k]), int(j[k]))
            if d < threshold and where is None:
                where = r.round
    return AuditReport(best, where, pair if where is not None else None)


def read_trace(path: str | Path) -> Trace:
    header, rounds, outcome = None, [], None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"line {lineno}: {e}") from e
        kind = obj.get("kind")
        if kind == "header":
            if obj.get("trace_version") != TRACE_VERSION:
                raise ValueError(f"unsupported trace version {obj.get('trace_version')}")
            header = obj
        elif kind == "round":
            try:
                rounds.append(
                    RoundRecord(
                        round=obj["round"],
                        before=[tuple(p) for p in obj["before"]],
                        after=[tuple(p) for p in obj["after"]],
                        phases=obj["phases"],
                        events=obj["events"],
                        min_motion_distance=obj["min_motion_distance"],
                        memories=obj.get("memories"),
                    )
                )
            except (KeyError, TypeError) as e:
                raise ValueError(f"line {lineno}: malformed round record") from e
        elif kind == "outcome":
            obj = dict(obj)
            obj.pop("kind")
            obj["status"] = Status(obj["status"])
            outcome = RunOutcome(**obj)
        else:
            raise ValueError(f"line {lineno}: unknown record kind {kind!r}")
    if header is None:
        raise ValueError("trace has no header")
    return Trace(header, rounds, outcome)
