"""Live steering service: runs one simulation, streams state over a
WebSocket, and validates operator commands (head waypoints, fault
injection, pause/resume, speed, pattern swaps).

Protocol, JSON over the socket:

  client -> server
    {"type": "steer", "target": [x, y], "frame": "common"|"global", "cmd_id": ...}
    {"type": "inject_fault", "role": "R1"|"R2"|"Leader"|<index>, "cmd_id": ...}
    {"type": "pause"} / {"type": "resume"}
    {"type": "set_speed", "eps": <events per second>}
    {"type": "load_pattern", "pattern": {...}}

  server -> client
    {"type": "state", ...}   after every simulation event (latest wins)
    {"type": "ack", "cmd_id": ...}
    {"type": "reject", "cmd_id": ..., "reason": ..., "detail": ...}

HTTP: GET /healthz -> 200, GET /session -> session metadata.
"""

from __future__ import annotations

import asyncio
import json
import math
import threading
import time
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .geometry import Point, add, dist, mul, rot90
from .coordsys import common_frame, extract_references
from .dispatch import Phase, classify, compute
from .formation import FlockPattern, PatternBook, pattern_complete, validate_pattern
from .harness import Scenario, build_pattern_book, draw_initial_positions, inject_fault
from .motion import steer_region_contains, validate_params
from .params import ProtocolParams
from .verify import check_placement_conditions
from .world import World


class Ack(dict):
    pass


class Reject(dict):
    pass


class SteerSession:
    """One simulation driven by operator commands.

    The world is only touched under the session lock; commands enter the
    world's ordered queue and take effect between events."""

    def __init__(self, scenario: Scenario, speed: float = 50.0):
        if scenario.robots is not None:
            positions = list(scenario.robots)
        else:
            positions, _ = draw_initial_positions(
                scenario.random or {"n": 8}, scenario.seed)
        self.params = scenario.params
        self.book = build_pattern_book(scenario, len(positions))
        # the operator may crash robots at will: carry shapes for every
        # cardinality the session can reach
        from .formation import make_line_pattern
        for k in range(4, len(positions)):
            if self.book.for_count(k) is None:
                fb = make_line_pattern(k - 3, self.params.motion)
                validate_pattern(fb, self.params)
                self.book.add(k, fb)
        self.world = World(positions, scenario.scheduler, self.params,
                           seed=scenario.seed,
                           identity_frames=scenario.identity_frames)
        self.lock = threading.Lock()
        self.speed = speed
        self.paused = False
        self.running = True
        self.state_seq = 0
        self._state: dict = {}
        self._thread: Optional[threading.Thread] = None
        self._refresh_state()

    # -- simulation control -------------------------------------------------

    def _dispatcher(self, points, local_params, rng, steer=None):
        return compute(points, self.book, local_params, rng, steer)

    def step(self, k: int = 1) -> None:
        with self.lock:
            for _ in range(k):
                self.world.step(self._dispatcher)
            self._refresh_state()

    def start(self) -> None:
        if self._thread is None:
            self._thread = threading.Thread(target=self._loop, daemon=True)
            self._thread.start()

    def stop(self) -> None:
        self.running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def _loop(self) -> None:
        last_beat = time.monotonic()
        while self.running:
            if self.paused or self.speed <= 0:
                if time.monotonic() - last_beat >= 1.0:
                    with self.lock:
                        self._refresh_state()  # heartbeat
                    last_beat = time.monotonic()
                time.sleep(0.02)
                continue
            self.step()
            last_beat = time.monotonic()
            time.sleep(1.0 / self.speed)

    # -- state --------------------------------------------------------------

    def _refresh_state(self) -> None:
        world = self.world
        snap = world.take_snapshot()
        pts = snap.positions
        tol = self.params.tolerance_for(pts)
        refs = extract_references(pts, tol)
        phase = None
        try:
            phase = classify(pts, self.book, self.params).phase.value
        except ValueError:
            phase = "Unclassified"
        state = {
            "type": "state",
            "i": len(world.events),
            "seq": self.state_seq,
            "positions": [[p.x, p.y] for p in pts],
            "phase": phase,
            "frame": "global",
            "references": None,
            "sec": None,
            "regions": None,
            "pending_steer": ([world.pending_steer.x, world.pending_steer.y]
                              if world.pending_steer else None),
            "margins": None,
            "paused": self.paused,
        }
        if refs is not None:
            m = self.params.motion
            ey = refs.axis
            ex = self._frame_ex(pts, refs, tol)
            state["frame"] = "common"
            state["references"] = {
                "leader": [refs.leader.x, refs.leader.y],
                "r1": [refs.r1.x, refs.r1.y],
                "r2": [refs.r2.x, refs.r2.y],
                "origin": [refs.center.x, refs.center.y],
                "ex": [ex.x, ex.y],
                "ey": [ey.x, ey.y],
            }
            state["sec"] = {"center": [refs.center.x, refs.center.y],
                            "radius": refs.radius}
            state["regions"] = {
                "steer_region": {"apex_y": refs.radius, "slope": m.steer_slope},
                "pattern_region": {
                    "upper_slope": m.pattern_upper_slope,
                    "lower_slope": m.pattern_lower_slope,
                    "tail_y": -refs.radius,
                },
            }
            margins = [v.margin for v in check_placement_conditions(pts, refs, tol)]
            state["margins"] = {
                "inside_circle": margins[0],
                "tail_side": margins[1],
                "leader_disc": margins[2],
            }
        self.state_seq += 1
        state["seq"] = self.state_seq
        self._state = state

    def _frame_ex(self, pts, refs, tol) -> Point:
        frame = common_frame(refs, tol)
        if frame.determined:
            return frame.ex
        pattern = self.book.for_count(len(pts))
        if pattern is not None:
            ex = pattern_complete(pts, refs, pattern, self.params.motion, tol)
            if ex is not None:
                return ex
        return rot90(refs.axis)

    def latest_state(self) -> dict:
        with self.lock:
            return dict(self._state)

    # -- commands -----------------------------------------------------------

    def handle_command(self, cmd: dict) -> dict:
        cmd_id = cmd.get("cmd_id")
        try:
            kind = cmd.get("type")
            if kind == "steer":
                return self._handle_steer(cmd)
            if kind == "inject_fault":
                with self.lock:
                    inject_fault(self.world, cmd.get("role"), self.params)
                return Ack(type="ack", cmd_id=cmd_id)
            if kind == "pause":
                self.paused = True
                return Ack(type="ack", cmd_id=cmd_id)
            if kind == "resume":
                self.paused = False
                return Ack(type="ack", cmd_id=cmd_id)
            if kind == "set_speed":
                eps = float(cmd["eps"])
                if eps < 0 or not math.isfinite(eps):
                    raise ValueError("speed must be finite and non-negative")
                self.speed = eps
                return Ack(type="ack", cmd_id=cmd_id)
            if kind == "load_pattern":
                pat = FlockPattern.from_dict(cmd["pattern"])
                validate_pattern(pat, self.params)
                with self.lock:
                    n = self.world.alive_count()
                    if len(pat.points) != n - 3:
                        raise ValueError("pattern size mismatch")
                    self.book.add(n, pat)
                return Ack(type="ack", cmd_id=cmd_id)
            return Reject(type="reject", cmd_id=cmd_id, reason="parse",
                          detail=f"unknown command type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            return Reject(type="reject", cmd_id=cmd_id, reason="parse",
                          detail=str(exc))

    def _handle_steer(self, cmd: dict) -> dict:
        cmd_id = cmd.get("cmd_id")
        target_raw = cmd["target"]
        frame_tag = cmd.get("frame", "common")
        with self.lock:
            snap = self.world.take_snapshot()
            pts = snap.positions
            tol = self.params.tolerance_for(pts)
            refs = extract_references(pts, tol)
            try:
                phase = classify(pts, self.book, self.params).phase
            except ValueError:
                phase = None
            if refs is None or phase is not Phase.FLOCK_MOTION:
                return Reject(type="reject", cmd_id=cmd_id,
                              reason="not-in-flock-motion",
                              detail=f"phase is {getattr(phase, 'value', None)}")
            spring = dist(refs.r1, refs.r2)
            if spring >= self.params.motion.spring_limit:
                return Reject(type="reject", cmd_id=cmd_id,
                              reason="spring-taut",
                              detail="the tail must catch up first")
            if frame_tag == "common":
                ex = self._frame_ex(pts, refs, tol)
                ey = refs.axis
                o = refs.center
                target = Point(o.x + target_raw[0] * ex.x + target_raw[1] * ey.x,
                               o.y + target_raw[0] * ex.y + target_raw[1] * ey.y)
            elif frame_tag == "global":
                target = Point(float(target_raw[0]), float(target_raw[1]))
            else:
                return Reject(type="reject", cmd_id=cmd_id, reason="parse",
                              detail=f"unsupported frame {frame_tag!r}")
            m = self.params.motion
            if not steer_region_contains(target, m, refs, tol):
                return Reject(
                    type="reject", cmd_id=cmd_id, reason="outside-steer-region",
                    detail={
                        "borders": [
                            {"slope": m.steer_slope, "apex_y": refs.radius},
                            {"slope": -m.steer_slope, "apex_y": refs.radius},
                        ]
                    })
            self.world.queue_command({"kind": "steer",
                                      "target": [target.x, target.y]})
        return Ack(type="ack", cmd_id=cmd_id)

    def metadata(self) -> dict:
        with self.lock:
            return {
                "robots": self.world.alive_count(),
                "events": len(self.world.events),
                "rounds": self.world.round_index,
                "paused": self.paused,
                "speed": self.speed,
                "pattern_counts": self.book.counts(),
            }


def create_app(scenario: Scenario, speed: float = 50.0,
               autostart: bool = True) -> FastAPI:
    app = FastAPI(title="flocksim steering service")
    session = SteerSession(scenario, speed=speed)
    app.state.session = session
    if autostart:
        session.start()

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.get("/session")
    def session_meta():
        return session.metadata()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        outbox: asyncio.Queue = asyncio.Queue()
        stop = asyncio.Event()

        async def pump_states():
            last_seq = -1
            while not stop.is_set():
                # acks first, never dropped
                while not outbox.empty():
                    await ws.send_json(outbox.get_nowait())
                state = session.latest_state()
                if state.get("seq", -1) != last_seq:
                    last_seq = state.get("seq", -1)
                    await ws.send_json(state)
                await asyncio.sleep(0.01)

        pump = asyncio.create_task(pump_states())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    cmd = json.loads(raw)
                    if not isinstance(cmd, dict):
                        raise ValueError("command must be an object")
                except ValueError as exc:
                    await outbox.put({"type": "reject", "cmd_id": None,
                                      "reason": "parse", "detail": str(exc)})
                    continue
                reply = session.handle_command(cmd)
                await outbox.put(dict(reply))
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            pump.cancel()

    return app


def main(argv=None) -> int:
    import argparse
    import uvicorn

    parser = argparse.ArgumentParser(prog="flocksim-steerd")
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8700)
    parser.add_argument("--speed", type=float, default=50.0)
    args = parser.parse_args(argv)
    scenario = Scenario.load(args.scenario)
    app = create_app(scenario, speed=args.speed)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
