"""Scenario generators and the scenario file format."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .pattern import TargetPattern
from .sim import Scenario, SimConfig
from .geom import Tolerances
from .visibility import Frame

KINDS = ("random", "collinear", "convex", "circle")


def random_positions(n: int, rng: np.random.Generator, side: float | None = None) -> list[tuple[float, float]]:
    """Uniform in a square of side 4*sqrt(n), rejection-sampled to spacing >= 1."""
    side = side if side is not None else 4 * math.sqrt(n)
    pts: list[tuple[float, float]] = []
    while len(pts) < n:
        p = rng.uniform(0.0, side, 2)
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) >= 1.0 for q in pts):
            pts.append((float(p[0]), float(p[1])))
    return pts


def collinear_positions(n: int, rng: np.random.Generator) -> list[tuple[float, float]]:
    gaps = rng.uniform(1.0, 3.0, max(n - 1, 0))
    xs = np.concatenate([[0.0], np.cumsum(gaps)])
    return [(float(x), 0.0) for x in xs]


def convex_positions(n: int, rng: np.random.Generator) -> list[tuple[float, float]]:
    # jittered regular polygon, chord >= 2 so jitter cannot break spacing
    if n == 1:
        return [(0.0, 0.0)]
    radius = max(2.0, 2.0 / (2 * math.sin(math.pi / n))) * 1.5
    step = 2 * math.pi / n
    angles = np.arange(n) * step + rng.uniform(-0.15, 0.15, n) * step
    return [(float(radius * math.cos(a)), float(radius * math.sin(a))) for a in angles]


def circle_positions(n: int, chord: float = 2.0) -> list[tuple[float, float]]:
    """Regular polygon: every robot on one circle (all compete for leader)."""
    if n == 1:
        return [(0.0, 0.0)]
    radius = max(chord / (2 * math.sin(math.pi / n)), chord / 2)
    return [(radius * math.cos(2 * math.pi * i / n), radius * math.sin(2 * math.pi * i / n)) for i in range(n)]


def random_pattern(k: int, rng: np.random.Generator) -> TargetPattern:
    """k distinct points on a small integer grid."""
    side = max(2, math.ceil(math.sqrt(k)) + 1)
    cells = rng.permutation(side * side)[:k]
    return TargetPattern.from_list([(int(c % side), int(c // side)) for c in cells])


def generate(kind: str, n: int, seed: int, k: int | None = None) -> Scenario:
    rng = np.random.default_rng(seed)
    if kind == "random":
        pos = random_positions(n, rng)
    elif kind == "collinear":
        pos = collinear_positions(n, rng)
    elif kind == "convex":
        pos = convex_positions(n, rng)
    elif kind == "circle":
        pos = circle_positions(n)
    else:
        raise ValueError(f"unknown scenario kind {kind!r}")
    pattern = random_pattern(k if k is not None else n, rng)
    return Scenario(pos, pattern, seed)


# -- file format -------------------------------------------------------------


def scenario_to_json(s: Scenario, config: SimConfig | None = None) -> dict:
    robots = []
    for i, p in enumerate(s.positions):
        if s.frames is None:
            frame = "random"
        else:
            f = s.frames[i]
            frame = {"rotation_deg": math.degrees(f.rotation), "reflect": f.reflect}
        robots.append({"x": p[0], "y": p[1], "frame": frame})
    out = {"robots": robots, "pattern": [list(p) for p in s.pattern.points], "seed": s.seed}
    if config is not None:
        out["params"] = {
            "eps_geom": config.tol.eps_geom,
            "eps_adj": config.tol.eps_adj,
            "clearance": config.tol.clearance,
            "scale_factor": config.scale_factor,
            "round_limit": config.round_limit,
        }
    return out


class ScenarioFormatError(ValueError):
    pass


def parse_scenario(obj: dict) -> tuple[list, list, int, list | None, SimConfig]:
    """Decode a scenario document without validating geometry.

    Returns raw positions, raw pattern, seed, frames (or None) and config.
    """
    try:
        robots = obj["robots"]
        pos = [(float(r["x"]), float(r["y"])) for r in robots]
        raw_frames = [r.get("frame", "random") for r in robots]
        if all(f == "random" for f in raw_frames):
            frames = None
        else:
            frames = []
            for f in raw_frames:
                if f == "random":
                    raise ScenarioFormatError("mixing explicit and random frames is not supported")
                frames.append(Frame(math.radians(float(f.get("rotation_deg", 0.0))), bool(f.get("reflect", False))))
        pattern = [(float(x), float(y)) for x, y in obj["pattern"]]
        seed = int(obj.get("seed", 0))
        params = obj.get("params") or {}
        base = Tolerances()
        tol = Tolerances(
            float(params.get("eps_geom", base.eps_geom)),
            float(params.get("eps_adj", base.eps_adj)),
            float(params.get("clearance", base.clearance)),
        )
        rl = params.get("round_limit")
        config = SimConfig(
            tol=tol,
            scale_factor=float(params.get("scale_factor", 5.0)),
            round_limit=int(rl) if rl is not None else None,
        )
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ScenarioFormatError(f"malformed scenario: {e}") from e
    return pos, pattern, seed, frames, config


def load_scenario(path: str | Path) -> tuple[Scenario, SimConfig]:
    obj = json.loads(Path(path).read_text())
    pos, pattern, seed, frames, config = parse_scenario(obj)
    return Scenario(pos, TargetPattern.from_list(pattern), seed, frames), config
