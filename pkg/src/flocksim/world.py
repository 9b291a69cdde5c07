"""Robot/world model: local frames, immutable snapshots, the asynchronous
look-compute-move scheduler with interruptible motion, and seedable RNG.

The simulation loop is single threaded and fully deterministic for a fixed
seed.  External commands (steering, fault injection) enter through an
ordered queue drained between events.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .geometry import Point, dist, finite, rotate
from .params import Action, Move, ProtocolParams, Stay


@dataclass(frozen=True)
class LocalFrame:
    """A robot's private coordinate system.

    ``origin`` is the robot's position, ``rotation`` the angle of its local
    x axis in global terms, ``handedness`` +1 or -1 (mirror), and
    ``unit_scale`` how many global units one local unit spans.
    """

    origin: Point
    rotation: float = 0.0
    handedness: int = 1
    unit_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.unit_scale <= 0:
            raise ValueError("unit_scale must be positive")
        if self.handedness not in (1, -1):
            raise ValueError("handedness must be +1 or -1")

    def at(self, origin: Point) -> "LocalFrame":
        return LocalFrame(origin, self.rotation, self.handedness, self.unit_scale)


def to_local(p: Point, frame: LocalFrame) -> Point:
    v = Point(p.x - frame.origin.x, p.y - frame.origin.y)
    v = rotate(v, -frame.rotation)
    if frame.handedness < 0:
        v = Point(v.x, -v.y)
    return Point(v.x / frame.unit_scale, v.y / frame.unit_scale)


def from_local(p: Point, frame: LocalFrame) -> Point:
    v = Point(p.x * frame.unit_scale, p.y * frame.unit_scale)
    if frame.handedness < 0:
        v = Point(v.x, -v.y)
    v = rotate(v, frame.rotation)
    return Point(v.x + frame.origin.x, v.y + frame.origin.y)


@dataclass(frozen=True)
class Snapshot:
    """Positions of all alive robots at one instant; carries no identities."""

    positions: tuple[Point, ...]
    taken_at: int


@dataclass
class RobotState:
    id: int
    position: Point
    frame: LocalFrame
    rng: np.random.Generator
    alive: bool = True
    # look-compute-move bookkeeping
    phase_of_cycle: str = "idle"            # idle | observed | moving
    observed: Optional[Snapshot] = None
    observed_steer: Optional[Point] = None  # global frame, pinned at look
    target: Optional[Point] = None          # global frame
    commanded_from: Optional[Point] = None
    move_phase: str = ""


@dataclass(frozen=True)
class SchedulerConfig:
    mode: str = "async"          # async | ssync
    min_progress: float = 0.2    # guaranteed fraction of a commanded move
    fairness_bound: int = 3      # k-bounded activation adversary
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("async", "ssync"):
            raise ValueError("mode must be async or ssync")
        if not 0 < self.min_progress <= 1:
            raise ValueError("min_progress must be in (0, 1]")
        if self.fairness_bound < 1:
            raise ValueError("fairness_bound must be >= 1")


@dataclass(frozen=True)
class Event:
    i: int
    robot: int
    kind: str          # look | compute | move_step | arrive | crash
    frm: Point
    to: Point
    phase: str

    def to_json(self) -> str:
        return json.dumps({
            "i": self.i, "robot": self.robot, "kind": self.kind,
            "from": [self.frm.x, self.frm.y], "to": [self.to.x, self.to.y],
            "phase": self.phase,
        })

    @classmethod
    def from_json(cls, line: str) -> "Event":
        d = json.loads(line)
        return cls(d["i"], d["robot"], d["kind"],
                   Point(*d["from"]), Point(*d["to"]), d["phase"])


def write_trace(events: Iterable[Event], path: str) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(ev.to_json())
            fh.write("\n")


def read_trace(path: str) -> list[Event]:
    with open(path) as fh:
        return [Event.from_json(line) for line in fh if line.strip()]


# The dispatcher contract: a pure function of the robot's local snapshot,
# its rng substream and an optional steer target pinned at look time.
Dispatcher = Callable[..., Action]


class World:
    """Single-threaded deterministic simulation of anonymous robots."""

    def __init__(self, positions: Sequence[Point], cfg: SchedulerConfig,
                 params: ProtocolParams, seed: int = 0,
                 identity_frames: bool = False) -> None:
        if not positions:
            raise ValueError("empty world")
        for p in positions:
            if not finite(p):
                raise ValueError("non-finite robot position")
        self.cfg = cfg
        self.params = params
        root = np.random.SeedSequence(seed)
        streams = root.spawn(2 + len(positions))
        self._sched_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        self._adv_rng = np.random.default_rng(streams[0])
        frame_rng = np.random.default_rng(streams[1])
        self.robots: list[RobotState] = []
        for i, p in enumerate(positions):
            if identity_frames:
                frame = LocalFrame(Point(*p))
            else:
                frame = LocalFrame(
                    origin=Point(*p),
                    rotation=float(frame_rng.uniform(0.0, 2.0 * math.pi)),
                    handedness=1 if frame_rng.random() < 0.5 else -1,
                    unit_scale=float(frame_rng.uniform(0.5, 2.0)),
                )
            self.robots.append(RobotState(
                id=i, position=Point(*p), frame=frame,
                rng=np.random.default_rng(streams[2 + i]),
            ))
        self.events: list[Event] = []
        self._i = 0
        self._last_phase = ""
        # fairness: picks[r][s] = activations of r since s was last activated
        n = len(positions)
        self._picks = [[0] * n for _ in range(n)]
        self.pending_steer: Optional[Point] = None  # global frame
        self.commands: deque = deque()
        # round accounting: a round closes when every alive robot has been
        # activated at least once since it opened
        self.round_index = 0
        self._round_seen: set[int] = set()
        self.activations = 0
        self.computes = 0

    # ------------------------------------------------------------------
    # observation

    def take_snapshot(self) -> Snapshot:
        alive = [r for r in self.robots if r.alive]
        if not alive:
            raise ValueError("empty world")
        pts = tuple(sorted((r.position for r in alive)))
        return Snapshot(positions=pts, taken_at=self._i)

    def alive_count(self) -> int:
        return sum(1 for r in self.robots if r.alive)

    # ------------------------------------------------------------------
    # external commands

    def queue_command(self, cmd: dict) -> None:
        self.commands.append(cmd)

    def _drain_commands(self) -> None:
        while self.commands:
            cmd = self.commands.popleft()
            kind = cmd["kind"]
            if kind == "crash":
                self._crash(cmd["robot"])
            elif kind == "steer":
                self.pending_steer = Point(*cmd["target"])
            else:
                raise ValueError(f"unknown command {kind!r}")

    def _crash(self, robot_id: int) -> None:
        r = self.robots[robot_id]
        if not r.alive:
            return
        r.alive = False
        r.phase_of_cycle = "idle"
        r.observed = None
        r.target = None
        self._emit(r, "crash", r.position, r.position, self._last_phase)
        self._round_seen.discard(robot_id)

    # ------------------------------------------------------------------
    # scheduling

    def _eligible(self, alive_ids: list[int]) -> list[int]:
        k = self.cfg.fairness_bound
        out = []
        for r in alive_ids:
            if all(self._picks[r][s] < k for s in alive_ids if s != r):
                out.append(r)
        return out if out else alive_ids

    def _pick_robot(self) -> RobotState:
        alive_ids = [r.id for r in self.robots if r.alive]
        if not alive_ids:
            raise ValueError("empty world")
        candidates = self._eligible(alive_ids)
        choice = candidates[int(self._sched_rng.integers(len(candidates)))]
        for s in alive_ids:
            if s != choice:
                self._picks[choice][s] += 1
            self._picks[s][choice] = 0
        self._round_seen.add(choice)
        if self._round_seen >= set(alive_ids):
            self.round_index += 1
            self._round_seen = set()
        self.activations += 1
        return self.robots[choice]

    def _emit(self, r: RobotState, kind: str, frm: Point, to: Point, phase: str) -> Event:
        ev = Event(self._i, r.id, kind, frm, to, phase)
        self.events.append(ev)
        self._i += 1
        if phase:
            self._last_phase = phase
        return ev

    # ------------------------------------------------------------------
    # the look / compute / move machinery

    def _look(self, r: RobotState) -> None:
        r.observed = self.take_snapshot()
        r.observed_steer = self.pending_steer
        r.phase_of_cycle = "observed"
        self._emit(r, "look", r.position, r.position, self._last_phase)

    def _compute(self, r: RobotState, dispatcher: Dispatcher) -> None:
        assert r.observed is not None
        local_frame = r.frame.at(r.position)
        local_pts = tuple(to_local(p, local_frame) for p in r.observed.positions)
        steer_local = (to_local(r.observed_steer, local_frame)
                       if r.observed_steer is not None else None)
        params_local = self.params.in_local_units(local_frame.unit_scale)
        action = dispatcher(local_pts, params_local, r.rng, steer_local)
        self.computes += 1
        phase = action.phase
        if isinstance(action, Move):
            target = from_local(action.target, local_frame)
            if not finite(target):
                raise ValueError("dispatcher produced a non-finite target")
            if action.used_steer and r.observed_steer is not None:
                if self.pending_steer == r.observed_steer:
                    self.pending_steer = None
            r.target = target
            r.commanded_from = r.position
            r.move_phase = phase
            r.phase_of_cycle = "moving"
            self._emit(r, "compute", r.position, target, phase)
            if dist(r.position, target) <= 1e-300:
                self._arrive(r)
        else:
            if (action.steer_rejected and r.observed_steer is not None
                    and self.pending_steer == r.observed_steer):
                self.pending_steer = None
            self._emit(r, "compute", r.position, r.position, phase)
            self._emit(r, "arrive", r.position, r.position, phase)
            r.phase_of_cycle = "idle"
            r.observed = None
            r.observed_steer = None

    def _move_step(self, r: RobotState, full: bool) -> None:
        assert r.target is not None and r.commanded_from is not None
        commanded = dist(r.commanded_from, r.target)
        remaining = dist(r.position, r.target)
        if full:
            step = remaining
        else:
            frac = self.cfg.min_progress + (1.0 - self.cfg.min_progress) * float(self._adv_rng.random())
            step = min(remaining, frac * commanded)
        frm = r.position
        if step >= remaining - 1e-300:
            r.position = r.target
        else:
            t = step / remaining
            r.position = Point(frm.x + (r.target.x - frm.x) * t,
                               frm.y + (r.target.y - frm.y) * t)
        self._emit(r, "move_step", frm, r.position, r.move_phase)
        if r.position == r.target:
            self._arrive(r)

    def _arrive(self, r: RobotState) -> None:
        self._emit(r, "arrive", r.position, r.position, r.move_phase)
        r.phase_of_cycle = "idle"
        r.observed = None
        r.observed_steer = None
        r.target = None
        r.commanded_from = None

    def step(self, dispatcher: Dispatcher) -> Event:
        """Advance the world by one scheduler activation; returns the last
        event it produced."""
        self._drain_commands()
        r = self._pick_robot()
        if self.cfg.mode == "ssync":
            self._look(r)
            self._compute(r, dispatcher)
            if r.phase_of_cycle == "moving":
                self._move_step(r, full=True)
        else:
            if r.phase_of_cycle == "idle":
                self._look(r)
            elif r.phase_of_cycle == "observed":
                self._compute(r, dispatcher)
            else:
                self._move_step(r, full=False)
        return self.events[-1]

    def run(self, dispatcher: Dispatcher, max_events: int,
            stop: Optional[Callable[["World"], bool]] = None,
            check_every: int = 1) -> None:
        k = 0
        while self._i < max_events:
            self.step(dispatcher)
            k += 1
            if stop is not None and k % check_every == 0 and stop(self):
                return
