import math

import numpy as np
import pytest

from flocksim.geometry import Point, dist
from flocksim.params import Move, ProtocolParams, Stay
from flocksim.world import (
    Event,
    LocalFrame,
    SchedulerConfig,
    World,
    from_local,
    read_trace,
    to_local,
    write_trace,
)

PARAMS = ProtocolParams()


def stay_dispatcher(points, params, rng, steer=None):
    return Stay(phase="Idle")


def make_world(positions, mode="async", seed=1, min_progress=0.2, fairness=3):
    cfg = SchedulerConfig(mode=mode, min_progress=min_progress,
                          fairness_bound=fairness, seed=seed)
    return World([Point(*p) for p in positions], cfg, PARAMS, seed=seed,
                 identity_frames=True)


class TestFrames:
    def test_identity_roundtrip(self):
        frame = LocalFrame(Point(0, 0))
        p = Point(3.5, -2.0)
        assert to_local(p, frame) == p
        assert from_local(p, frame) == p

    def test_rotated_frame_example(self):
        # frame at (1,0) rotated a quarter turn: global (1,1) reads as (1,0)
        frame = LocalFrame(Point(1, 0), rotation=math.pi / 2)
        local = to_local(Point(1, 1), frame)
        assert dist(local, Point(1, 0)) < 1e-12

    def test_left_handed_flips_y(self):
        right = LocalFrame(Point(0.5, 0.5), rotation=0.7, handedness=1, unit_scale=1.3)
        left = LocalFrame(Point(0.5, 0.5), rotation=0.7, handedness=-1, unit_scale=1.3)
        probe = Point(2.0, 1.0)
        pr = to_local(probe, right)
        pl = to_local(probe, left)
        assert abs(pr.x - pl.x) < 1e-12
        assert abs(pr.y + pl.y) < 1e-12

    def test_roundtrip_random_frames(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            frame = LocalFrame(
                Point(*rng.uniform(-5, 5, 2)),
                rotation=float(rng.uniform(0, 2 * math.pi)),
                handedness=1 if rng.random() < 0.5 else -1,
                unit_scale=float(rng.uniform(0.5, 2.0)),
            )
            p = Point(*rng.uniform(-10, 10, 2))
            back = from_local(to_local(p, frame), frame)
            assert dist(back, p) < 1e-9


class TestSnapshot:
    def test_all_alive_positions(self):
        w = make_world([(0, 0), (1, 0), (2, 0)])
        snap = w.take_snapshot()
        assert sorted(snap.positions) == [Point(0, 0), Point(1, 0), Point(2, 0)]

    def test_mid_motion_interpolation(self):
        w = make_world([(0, 0)], min_progress=0.2)

        def go(points, params, rng, steer=None):
            return Move(Point(2, 0), phase="Go")

        # look, compute, then one partial step
        w.step(go)
        w.step(go)
        w.step(go)
        pos = w.robots[0].position
        assert 0.2 * 2 - 1e-12 <= pos.x <= 2.0
        assert pos.y == 0.0
        assert w.take_snapshot().positions[0] == pos

    def test_crash_removes_robot(self):
        w = make_world([(0, 0), (1, 0), (2, 0)])
        w.queue_command({"kind": "crash", "robot": 1})
        w.step(stay_dispatcher)
        assert len(w.take_snapshot().positions) == 2
        assert any(ev.kind == "crash" for ev in w.events)


class TestScheduler:
    def test_ssync_stay_arrives_in_place(self):
        w = make_world([(0, 0)], mode="ssync")
        ev = w.step(stay_dispatcher)
        assert ev.kind == "arrive"
        assert ev.frm == ev.to

    def test_min_progress_bound(self):
        w = make_world([(0, 0)], min_progress=0.25)

        def go(points, params, rng, steer=None):
            return Move(Point(1, 0), phase="Go") if points[0] == Point(0, 0) else Stay(phase="Idle")

        for _ in range(40):
            w.step(go)
        steps = [ev for ev in w.events if ev.kind == "move_step"]
        assert steps
        # every partial step covers at least min_progress of the command
        first = steps[0]
        assert dist(first.frm, first.to) >= 0.25 - 1e-12

    def test_fairness_bound_one_alternates(self):
        w = make_world([(0, 0), (5, 0)], fairness=1)
        order = []
        for _ in range(20):
            w.step(stay_dispatcher)
            # identify the acting robot from the newest events
            order.append(w.events[-1].robot)
        # consecutive activations by the same robot only within one cycle;
        # cycles are look+compute(+arrive), all stamped to the same robot
        collapsed = [order[0]]
        for r in order[1:]:
            if r != collapsed[-1]:
                collapsed.append(r)
        for a, b in zip(collapsed, collapsed[1:]):
            assert a != b

    def test_empty_world_raises(self):
        w = make_world([(0, 0)])
        w.queue_command({"kind": "crash", "robot": 0})
        with pytest.raises(ValueError, match="empty world"):
            w.step(stay_dispatcher)


class TestDeterminism:
    def test_bit_identical_traces(self):
        def wobble(points, params, rng, steer=None):
            me = min(points, key=lambda p: p.x * p.x + p.y * p.y)
            if rng.random() < 0.5:
                return Move(Point(me.x + 0.1, me.y), phase="Wobble")
            return Stay(phase="Wobble")

        runs = []
        for _ in range(2):
            w = make_world([(0, 0), (1, 0), (0, 1)], seed=42)
            for _ in range(60):
                w.step(wobble)
            runs.append([ev.to_json() for ev in w.events])
        assert runs[0] == runs[1]

    def test_motion_progress_invariant(self):
        w = make_world([(0, 0), (3, 1)], min_progress=0.3, seed=9)

        def go(points, params, rng, steer=None):
            me = min(points, key=lambda p: p.x * p.x + p.y * p.y)
            return Move(Point(me.x + 1, me.y), phase="Go")

        for _ in range(200):
            w.step(go)
        commanded_len = {}
        commanded_to = {}
        for ev in w.events:
            if ev.kind == "compute" and ev.frm != ev.to:
                commanded_len[ev.robot] = dist(ev.frm, ev.to)
                commanded_to[ev.robot] = ev.to
            elif ev.kind == "move_step":
                step = dist(ev.frm, ev.to)
                full = commanded_len.get(ev.robot, 0.0)
                arrived = ev.to == commanded_to.get(ev.robot)
                assert arrived or step >= 0.3 * full - 1e-9

    def test_obliviousness_same_inputs_same_output(self):
        # a dispatcher that consumes randomness must still be reproducible
        # when replayed with an identical generator state
        def coin(points, params, rng, steer=None):
            return Move(Point(1, 1), phase="X") if rng.random() < 0.5 else Stay(phase="X")

        pts = (Point(0, 0), Point(1, 0))
        out1 = coin(pts, PARAMS, np.random.default_rng(5))
        out2 = coin(pts, PARAMS, np.random.default_rng(5))
        assert out1 == out2


class TestTraceIO:
    def test_jsonl_roundtrip(self, tmp_path):
        w = make_world([(0, 0), (2, 2)])
        for _ in range(30):
            w.step(stay_dispatcher)
        path = tmp_path / "trace.jsonl"
        write_trace(w.events, str(path))
        back = read_trace(str(path))
        assert back == w.events
        assert all(isinstance(ev, Event) for ev in back)

    def test_event_indices_strictly_increase(self):
        w = make_world([(0, 0), (2, 2)])
        for _ in range(30):
            w.step(stay_dispatcher)
        idx = [ev.i for ev in w.events]
        assert idx == sorted(idx)
        assert len(set(idx)) == len(idx)
