import json
import math
import time

import pytest
from fastapi.testclient import TestClient

from flocksim.geometry import Point, dist
from flocksim.harness import Scenario
from flocksim.steerd import SteerSession, create_app
from flocksim.coordsys import extract_references
from flocksim.motion import is_flocking_formation


def scenario(seed=11, n=5, **kw):
    d = {
        "seed": seed,
        "random": {"n": n, "box": [-4, -4, 4, 4]},
        "pattern": "auto",
        "params": {"steer_slope": 1.0, "pattern_lower_slope": 1.5,
                   "pattern_upper_slope": 1.5, "catchup_step": 0.4,
                   "spring_limit": 1e9},
        "scheduler": {"mode": "async", "min_progress": 0.2,
                      "fairness_bound": 3, "seed": seed},
    }
    d.update(kw)
    return Scenario.from_dict(d)


def run_until_formed(session, cap=30000):
    for _ in range(cap // 50):
        session.step(50)
        st = session.latest_state()
        if st["phase"] == "FlockMotion":
            return st
    raise AssertionError("never reached the motion phase")


class TestSession:
    def test_state_stream_shape(self):
        s = SteerSession(scenario(), speed=0)
        st = s.latest_state()
        assert st["type"] == "state"
        assert len(st["positions"]) == 5
        assert st["phase"]
        s.step(10)
        st2 = s.latest_state()
        assert st2["seq"] > st["seq"]

    def test_state_carries_references_and_regions_when_formed(self):
        s = SteerSession(scenario(), speed=0)
        st = run_until_formed(s)
        assert st["frame"] == "common"
        assert st["references"] is not None
        assert st["sec"]["radius"] > 0
        assert st["regions"]["steer_region"]["slope"] == 1.0
        assert st["margins"]["tail_side"] > 0

    def test_steer_accept_and_execution(self):
        s = SteerSession(scenario(), speed=0)
        st = run_until_formed(s)
        r = st["sec"]["radius"]
        reply = s.handle_command({"type": "steer", "target": [0.1 * r, 1.3 * r],
                                  "frame": "common", "cmd_id": 1})
        assert reply["type"] == "ack"
        # the head must eventually arrive at the commanded point
        ox, oy = st["references"]["origin"]
        ex = st["references"]["ex"]
        ey = st["references"]["ey"]
        want = Point(ox + 0.1 * r * ex[0] + 1.3 * r * ey[0],
                     oy + 0.1 * r * ex[1] + 1.3 * r * ey[1])
        for _ in range(400):
            s.step(25)
            positions = [Point(*p) for p in s.latest_state()["positions"]]
            if any(dist(p, want) < 1e-9 for p in positions):
                break
        else:
            raise AssertionError("head never arrived at the steer target")

    def test_steer_into_pattern_region_rejected(self):
        s = SteerSession(scenario(), speed=0)
        st = run_until_formed(s)
        r = st["sec"]["radius"]
        reply = s.handle_command({"type": "steer", "target": [0.0, -0.6 * r],
                                  "frame": "common", "cmd_id": 2})
        assert reply["type"] == "reject"
        assert reply["reason"] == "outside-steer-region"
        assert "borders" in reply["detail"]

    def test_steer_outside_motion_phase_rejected(self):
        s = SteerSession(scenario(), speed=0)
        reply = s.handle_command({"type": "steer", "target": [0, 10],
                                  "frame": "common", "cmd_id": 3})
        assert reply["type"] == "reject"
        assert reply["reason"] == "not-in-flock-motion"

    def test_malformed_command_rejected(self):
        s = SteerSession(scenario(), speed=0)
        reply = s.handle_command({"type": "steer"})
        assert reply["type"] == "reject"
        assert reply["reason"] == "parse"

    def test_inject_fault_triggers_reelection(self):
        s = SteerSession(scenario(seed=13, n=6), speed=0)
        run_until_formed(s)
        reply = s.handle_command({"type": "inject_fault", "role": "R1",
                                  "cmd_id": 4})
        assert reply["type"] == "ack"
        s.step(5)
        assert len(s.latest_state()["positions"]) == 5
        # a new formation must emerge with the fallback pattern
        st = run_until_formed(s)
        assert st["references"] is not None

    def test_pause_resume_speed(self):
        s = SteerSession(scenario(), speed=0)
        assert s.handle_command({"type": "pause"})["type"] == "ack"
        assert s.paused
        assert s.handle_command({"type": "resume"})["type"] == "ack"
        assert not s.paused
        assert s.handle_command({"type": "set_speed", "eps": 10.0})["type"] == "ack"
        assert s.speed == 10.0
        bad = s.handle_command({"type": "set_speed", "eps": float("nan")})
        assert bad["type"] == "reject"

    def test_accepted_steer_never_refused_downstream(self):
        # validation equivalence: every ack'd steer is consumed by a head
        # move, never dropped as rejected
        s = SteerSession(scenario(seed=21, n=5), speed=0)
        st = run_until_formed(s)
        r = st["sec"]["radius"]
        for k in range(3):
            st = run_until_formed(s)
            if s.world.pending_steer is not None:
                continue
            reply = s.handle_command({"type": "steer",
                                      "target": [0.05 * r, 1.25 * r],
                                      "frame": "common", "cmd_id": 10 + k})
            assert reply["type"] == "ack"
            # run until consumed; consumption must be a head move
            for _ in range(600):
                s.step(20)
                if s.world.pending_steer is None:
                    break
            assert s.world.pending_steer is None
            rejected = [ev for ev in s.world.events
                        if ev.kind == "compute" and ev.phase == "FlockMotion"
                        and ev.frm == ev.to]
            # stays in FlockMotion exist (other robots), but the steer must
            # have produced exactly one additional head move per accept
            moves = [ev for ev in s.world.events
                     if ev.kind == "compute" and ev.phase == "FlockMotion"
                     and ev.frm != ev.to]
            assert len(moves) >= k + 1


class TestHTTP:
    def test_healthz_and_session(self):
        app = create_app(scenario(), speed=0, autostart=False)
        with TestClient(app) as client:
            assert client.get("/healthz").status_code == 200
            meta = client.get("/session").json()
            assert meta["robots"] == 5
            assert meta["paused"] is False

    def test_websocket_roundtrip(self):
        app = create_app(scenario(), speed=0, autostart=False)
        session = app.state.session
        run_until_formed(session)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                # first message is a state frame
                msg = ws.receive_json()
                assert msg["type"] == "state"
                assert msg["phase"] == "FlockMotion"
                r = msg["sec"]["radius"]
                ws.send_text(json.dumps({"type": "steer",
                                         "target": [0.0, 1.4 * r],
                                         "frame": "common", "cmd_id": 7}))
                for _ in range(50):
                    msg = ws.receive_json()
                    if msg["type"] != "state":
                        break
                assert msg["type"] == "ack"
                assert msg["cmd_id"] == 7

    def test_websocket_parse_reject(self):
        app = create_app(scenario(), speed=0, autostart=False)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_json()
                ws.send_text("this is not json")
                for _ in range(50):
                    msg = ws.receive_json()
                    if msg["type"] != "state":
                        break
                assert msg["type"] == "reject"
                assert msg["reason"] == "parse"
