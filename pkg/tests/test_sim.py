import itertools
import math

import numpy as np
import pytest

from fatbots.pattern import TargetPattern, pattern_achieved
from fatbots.robot import Memory, Phase
from fatbots.scenarios import generate
from fatbots.sim import (
    RoundRecord,
    Scenario,
    SimConfig,
    Status,
    WorldState,
    collision_audit,
    frames_for,
    motion_min_distance,
    read_trace,
    run,
    step,
    validate_scenario,
)
from fatbots.visibility import Frame, InvalidConfiguration

TRIANGLE = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)]
SQUARE = [(0.0, 0.0), (6.0, 0.0), (6.0, 5.0), (0.0, 5.0)]


def scenario(pos, pattern, seed=3, frames=None):
    return Scenario(list(pos), TargetPattern.from_list(pattern), seed, frames)


def record(r, before, after):
    return RoundRecord(r, before, after, [0] * len(before), [], 0.0)


class TestValidate:
    def test_overlap(self):
        assert any(v.startswith("overlap") for v in validate_scenario([(0, 0), (0.9, 0)], [(0, 0)]))

    def test_ok(self):
        assert validate_scenario(TRIANGLE, [(0, 0)]) == []

    def test_pattern_duplicate(self):
        assert "pattern duplicate" in validate_scenario(TRIANGLE, [(0, 0), (0, 0)])

    def test_non_finite(self):
        assert validate_scenario([(0, 0), (math.nan, 1)], [(0, 0)])

    def test_never_raises_on_junk(self):
        assert validate_scenario("nonsense", [(0, 0)])
        assert validate_scenario(TRIANGLE, [("a",)])

    def test_run_rejects_invalid(self):
        with pytest.raises(InvalidConfiguration):
            run(scenario([(0, 0), (0.5, 0)], [(0, 0)]))


class TestStep:
    def test_all_stay(self):
        pos = [(0.0, 0.0), (2.0, 0.0), (5.0, 1.0)]
        w = WorldState(pos, [Frame()] * 3, [Memory(phase=Phase.DONE)] * 3)
        w2, rec = step(w, scenario(pos, [(0, 0)]))
        assert w2.positions == pos and w2.round == 1
        assert rec.min_motion_distance == 2.0

    def test_square_expands(self):
        pos = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]
        frames = [Frame(0.7 * i, i % 2 == 0) for i in range(4)]
        w = WorldState(pos, frames, [Memory()] * 4)
        w2, _ = step(w, scenario(pos, [(0, 0)]))
        for i, j in itertools.combinations(range(4), 2):
            assert math.dist(w2.positions[i], w2.positions[j]) > math.dist(pos[i], pos[j])
        for p, q in zip(pos, w2.positions):
            assert abs(math.dist(p, q) - 1) < 1e-12

    def test_synchronous_look(self):
        # the step result must not depend on processing order: a permuted
        # world gives the permuted result
        sc = generate("random", 8, 2)
        frames = frames_for(sc)
        w = WorldState(sc.positions, frames, [Memory()] * 8)
        w2, _ = step(w, sc)
        perm = list(reversed(range(8)))
        wp = WorldState([sc.positions[i] for i in perm], [frames[i] for i in perm], [Memory()] * 8)
        wp2, _ = step(wp, Scenario([sc.positions[i] for i in perm], sc.pattern, sc.seed))
        for k, i in enumerate(perm):
            assert math.dist(wp2.positions[k], w2.positions[i]) < 1e-12


class TestAudit:
    def test_crossing_caught_inline(self):
        d, pair = motion_min_distance([(0, 0), (2, 0)], [(2, 2), (0, 2)])
        assert d < 1 and pair == (0, 1)

    def test_planted_swap(self):
        recs = [record(0, [(0, 0), (3, 0)], [(0, 0), (3, 0)]), record(1, [(0, 0), (3, 0)], [(3, 0), (0, 0)])]
        rep = collision_audit(recs)
        assert rep.offending_round == 1 and rep.min_distance == 0 and not rep.ok

    def test_static(self):
        pos = [(0, 0), (1.5, 0), (0, 4)]
        rep = collision_audit([record(0, pos, pos)])
        assert rep.ok and rep.min_distance == 1.5

    def test_glancing_pass(self):
        # closest approach sits strictly inside the round, at exactly 1
        rep = collision_audit([record(0, [(0, 0), (2, 1)], [(4, 0), (2, 1)])])
        assert rep.ok and abs(rep.min_distance - 1) < 1e-12

    def test_malformed(self):
        with pytest.raises(ValueError):
            collision_audit([record(0, [(0, 0)], [(0, 0), (1, 1)])])


class TestRun:
    def test_single_robot(self):
        trace, out = run(scenario([(0.0, 0.0)], [(0, 0)]))
        assert out.status == Status.PATTERN_FORMED
        ev = [(r.round, e["event"]) for r in trace.rounds for e in r.events]
        assert (0, "counter_started") in ev and (6, "phase") in ev
        assert out.le_iterations == 0 and out.leader == 0

    def test_pattern_too_large(self):
        _, out = run(scenario([(0, 0), (3, 0), (0, 4)], [(i, 0) for i in range(5)]))
        assert out.status == Status.INFEASIBLE and out.le_rounds == 0 and out.pf_rounds == 0

    def test_subset_pattern_with_leftover(self):
        sc = scenario(SQUARE, [(0, 0), (1, 0), (0, 1)])
        trace, out = run(sc)
        assert out.status == Status.PATTERN_FORMED
        final = trace.rounds[-1].after
        assert len(out.placed) == 3 and out.leader not in out.placed
        assert pattern_achieved(final, sc.pattern, 1e-6, placed=out.placed)

    def test_leader_takes_last_slot(self):
        sc = scenario(SQUARE, [(0, 0), (1, 0), (0, 1), (1, 1)])
        trace, out = run(sc)
        assert out.status == Status.PATTERN_FORMED and out.placed[-1] == out.leader
        assert pattern_achieved(trace.rounds[-1].after, sc.pattern, 1e-6, placed=out.placed)

    def test_deterministic(self):
        sc = generate("random", 7, 12)
        assert run(sc)[0].dumps() == run(sc)[0].dumps()

    def test_seed_changes_run(self):
        a = run(generate("circle", 6, 1))[0].dumps()
        b = run(generate("circle", 6, 2))[0].dumps()
        assert a != b

    def test_phases_never_go_back(self):
        trace, _ = run(generate("random", 9, 4))
        last = [0] * 9
        for r in trace.rounds:
            assert all(p >= q for p, q in zip(r.phases, last))
            last = r.phases

    def test_round_limit(self):
        _, out = run(generate("random", 6, 1), SimConfig(round_limit=5))
        assert out.status == Status.ROUND_LIMIT and out.total_rounds == 5

    def test_trace_round_trip(self, tmp_path):
        trace, out = run(generate("convex", 5, 8), SimConfig(record_memory=True))
        path = tmp_path / "t.jsonl"
        trace.write(path)
        back = read_trace(path)
        assert back.header == trace.header and back.outcome == out
        assert [r.to_json() for r in back.rounds] == [r.to_json() for r in trace.rounds]
        assert collision_audit(back).ok

    def test_bad_trace_version(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text('{"kind": "header", "trace_version": 99}\n')
        with pytest.raises(ValueError):
            read_trace(path)


def test_rng_streams_are_per_robot():
    from fatbots.sim import robot_rngs

    a = [g.random() for g in robot_rngs(5, 4)]
    b = [g.random() for g in robot_rngs(5, 4)]
    assert a == b and len(set(a)) == 4
    assert np.isclose(robot_rngs(5, 6)[2].random(), a[2])
