"""SVG snapshots of a recorded run.

One file per selected round: robot disks filled by phase, the convex hull of
all robots outlined, and the elected leader ringed.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .geom import Point, convex_hull
from .robot import Phase
from .sim import Trace
from .visibility import RADIUS

PHASE_FILL = {
    Phase.MUTUAL_VISIBILITY: "#4c78a8",
    Phase.LEADER_ELECTION: "#f58518",
    Phase.PATTERN_FORMATION: "#54a24b",
    Phase.DONE: "#9d9d9d",
}
LEADER_STROKE = "#d62728"
MARGIN = 2.0


def frame_svg(positions: Sequence[Point], phases: Sequence[int], leader: int | None, label: str = "") -> str:
    xs = [p[0] for p in positions]
    ys = [p[1] for p in positions]
    x0, x1 = min(xs) - RADIUS - MARGIN, max(xs) + RADIUS + MARGIN
    y0, y1 = min(ys) - RADIUS - MARGIN, max(ys) + RADIUS + MARGIN
    w, h = x1 - x0, y1 - y0
    # world y points up; flip inside a group so text stays upright
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.4f} {-y1:.4f} {w:.4f} {h:.4f}" '
        f'width="800" height="{800 * h / w:.0f}">',
        f'<rect x="{x0:.4f}" y="{-y1:.4f}" width="{w:.4f}" height="{h:.4f}" fill="white"/>',
        '<g transform="scale(1,-1)">',
    ]
    stroke = max(w, h) / 800
    if len(positions) >= 2:
        hull = convex_hull(positions).vertices
        pts = " ".join(f"{x:.4f},{y:.4f}" for x, y in hull)
        tag = "polyline" if len(hull) == 2 else "polygon"
        parts.append(f'<{tag} points="{pts}" fill="none" stroke="#555" stroke-width="{stroke:.4f}" '
                     f'stroke-dasharray="{4 * stroke:.4f}"/>')
    for i, ((x, y), ph) in enumerate(zip(positions, phases)):
        fill = PHASE_FILL.get(Phase(ph), "black")
        ring = (
            f' stroke="{LEADER_STROKE}" stroke-width="{max(0.12, 3 * stroke):.4f}"'
            if i == leader
            else f' stroke="black" stroke-width="{stroke:.4f}"'
        )
        parts.append(f'<circle cx="{x:.4f}" cy="{y:.4f}" r="{RADIUS}" fill="{fill}"{ring}><title>robot {i}</title></circle>')
    parts.append("</g>")
    if label:
        size = max(w, h) / 40
        parts.append(f'<text x="{x0 + size:.4f}" y="{-y1 + 1.5 * size:.4f}" font-size="{size:.4f}" '
                     f'font-family="monospace">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def frames(trace: Trace, every: int = 1):
    """Yield (round, positions, phases, leader) for every ``every``-th round
    plus the final configuration."""
    if every < 1:
        raise ValueError("every must be at least 1")
    leader = None
    last = None
    for r in trace.rounds:
        for ev in r.events:
            if ev.get("event") == "leader_elected":
                leader = ev["robot"]
        if r.round % every == 0:
            yield r.round, r.before, r.phases, leader
        last = r
    if last is not None:
        if trace.final_memories is not None:
            phases = [int(m.phase) for m in trace.final_memories]
        else:
            phases = _phases_after(last)
        yield last.round + 1, last.after, phases, leader
    elif trace.header.get("positions"):
        pos = [tuple(p) for p in trace.header["positions"]]
        yield 0, pos, [0] * len(pos), None


def _phases_after(r) -> list[int]:
    out = list(r.phases)
    for ev in r.events:
        if ev.get("event") == "phase":
            out[ev["robot"]] = int(Phase[ev["to"]])
    return out


def render_trace(trace: Trace, out_dir: str | Path, every: int = 1) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rnd, pos, phases, leader in frames(trace, every):
        path = out / f"round_{rnd:06d}.svg"
        path.write_text(frame_svg(pos, phases, leader, f"round {rnd}"))
        written.append(path)
    return written
