"""Trace- and state-level checks for the protocol's safety and progress
claims: placement conditions, collision freedom, reference stability and
convergence rates.

All checks are pure functions of their inputs; verifying a reloaded trace
yields identical verdicts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .geometry import (
    Point,
    Tolerance,
    dist,
    moving_points_min_distance,
    sub,
)
from .coordsys import References, extract_references
from .params import ProtocolParams
from .world import Event


@dataclass(frozen=True)
class Verdict:
    check: str
    passed: bool
    margin: float = math.inf
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"check": self.check, "pass": self.passed,
                "margin": self.margin, "witness": self.witness}


def report(verdicts: Sequence[Verdict]) -> str:
    return json.dumps([v.to_dict() for v in verdicts], indent=2)


# ---------------------------------------------------------------------------
# placement conditions at one instant

def check_placement_conditions(points: Sequence[Point], refs: References,
                 tol: Tolerance) -> list[Verdict]:
    """The three placement conditions: everyone inside the head-tail
    circle, every non-reference robot strictly on the tail's side, and the
    leader's inner disc empty of other robots."""
    o = refs.center
    r = refs.radius
    ey = refs.axis
    inside_margin = math.inf
    inside_witness = None
    side_margin = math.inf
    side_witness = None
    disc_margin = math.inf
    disc_witness = None
    lead_r = dist(refs.leader, o)

    def is_ref(p: Point) -> bool:
        return (dist(p, refs.r1) <= tol.eps_len or dist(p, refs.r2) <= tol.eps_len
                or dist(p, refs.leader) <= tol.eps_len)

    for p in points:
        m1 = r + tol.eps_len - dist(p, o)
        if m1 < inside_margin:
            inside_margin = m1
            inside_witness = p
        if not is_ref(p):
            y = sub(p, o).x * ey.x + sub(p, o).y * ey.y
            m2 = -y
            if m2 < side_margin:
                side_margin = m2
                side_witness = p
        if dist(p, refs.leader) > tol.eps_len:
            m3 = dist(p, o) - (lead_r - tol.eps_len)
            if m3 < disc_margin:
                disc_margin = m3
                disc_witness = p

    def w(p):
        return None if p is None else {"point": [p.x, p.y]}

    return [
        Verdict("placement-inside-circle", inside_margin >= 0.0, inside_margin,
                None if inside_margin >= 0 else w(inside_witness)),
        Verdict("placement-tail-side", side_margin > 0.0, side_margin,
                None if side_margin > 0 else w(side_witness)),
        Verdict("placement-leader-disc-empty", disc_margin >= 0.0, disc_margin,
                None if disc_margin >= 0 else w(disc_witness)),
    ]


# ---------------------------------------------------------------------------
# trace reconstruction helpers

def initial_positions(events: Sequence[Event]) -> dict[int, Point]:
    """Each robot's position before the trace starts: the start point of
    its first event."""
    first: dict[int, Point] = {}
    for ev in events:
        if ev.robot not in first:
            first[ev.robot] = ev.frm
    return first


def replay_positions(events: Sequence[Event]):
    """Yields (event, positions-after, alive-set) applying events in order.

    Every robot is present from the start (at the origin of its first
    event); a robot's position between its events is its last endpoint."""
    pos = initial_positions(events)
    alive: set[int] = set(pos)
    for ev in events:
        if ev.kind == "crash":
            alive.discard(ev.robot)
            pos.pop(ev.robot, None)
        else:
            pos[ev.robot] = ev.to
            alive.add(ev.robot)
        yield ev, dict(pos), set(alive)


def rounds_over(events: Sequence[Event]) -> list[int]:
    """Round index per event: a round closes once every robot alive at the
    time has acted at least once since it opened."""
    all_ids = {ev.robot for ev in events}
    crashed: set[int] = set()
    seen: set[int] = set()
    current_round = 0
    out = []
    for ev in events:
        if ev.kind == "crash":
            crashed.add(ev.robot)
            seen.discard(ev.robot)
        else:
            seen.add(ev.robot)
        out.append(current_round)
        active = all_ids - crashed
        if active and seen >= active:
            current_round += 1
            seen = set()
    return out


# ---------------------------------------------------------------------------
# collision freedom

def check_no_collision(events: Sequence[Event], r_min: float = 0.0) -> Verdict:
    """Closest approach over the piecewise-linear motion: each move_step
    sweeps its segment over one event interval while everything else
    stands still; robots at rest are compared pairwise after every event."""
    if not events:
        raise ValueError("malformed trace: empty")
    margin = math.inf
    witness = None
    pos = initial_positions(events)
    alive: set[int] = set(pos)
    for ev in events:
        if ev.kind == "crash":
            alive.discard(ev.robot)
            pos.pop(ev.robot, None)
            continue
        if ev.kind == "move_step":
            for other, q in pos.items():
                if other == ev.robot:
                    continue
                d = moving_points_min_distance(ev.frm, ev.to, q, q)
                if d < margin:
                    margin = d
                    witness = {"event": ev.i, "robots": [ev.robot, other],
                               "at": [q.x, q.y]}
        pos[ev.robot] = ev.to
        alive.add(ev.robot)
        if len(pos) >= 2:
            ids = sorted(pos)
            for a_i in range(len(ids)):
                for b_i in range(a_i + 1, len(ids)):
                    a, b = ids[a_i], ids[b_i]
                    d = dist(pos[a], pos[b])
                    if d < margin:
                        margin = d
                        witness = {"event": ev.i, "robots": [a, b],
                                   "at": [pos[a].x, pos[a].y]}
    passed = margin > r_min
    return Verdict("no-collision", passed, margin,
                   None if passed else witness)


# ---------------------------------------------------------------------------
# reference stability

POST_ALIGNMENT_PHASES = {
    "Placement", "CircularConfig", "Orientation", "PatternFormation",
    "ToCenter", "FlockMotion", "Recovery",
}


def check_reference_stability(events: Sequence[Event],
                              params: ProtocolParams) -> Verdict:
    """Once the references have emerged (the run has moved past the
    alignment stages), the physical robots realizing leader/head/tail must
    not change until the trace ends or a robot crashes; each crash opens a
    new stability window."""
    current: Optional[tuple[int, int, int]] = None
    windows = 0
    changes = []
    emerged = False
    for ev, pos, alive in replay_positions(events):
        if ev.kind == "crash":
            current = None
            emerged = False
            continue
        if ev.phase in POST_ALIGNMENT_PHASES:
            emerged = True
        elif ev.phase in ("Separation", "LeaderTieBreak", "Alignment"):
            # a regression to the bootstrap stages re-opens the window
            # (reachable only through faults or adversarial starts)
            if current is not None:
                current = None
            emerged = False
        if not emerged or ev.kind != "look":
            continue
        pts = tuple(sorted(pos[i] for i in alive))
        if len(pts) < 4:
            continue
        tol = params.tolerance_for(pts)
        refs = extract_references(pts, tol)
        if refs is None:
            continue
        ids = _resolve_roles(refs, pos, alive, tol)
        if ids is None:
            continue
        if current is None:
            current = ids
            windows += 1
        elif ids != current:
            changes.append({"event": ev.i, "was": list(current), "now": list(ids)})
            current = ids
    passed = not changes
    return Verdict("reference-stability", passed,
                   float(windows) if passed else float(len(changes)),
                   None if passed else {"changes": changes[:5]})


def _resolve_roles(refs: References, pos: dict[int, Point], alive: set[int],
                   tol: Tolerance) -> Optional[tuple[int, int, int]]:
    def nearest(target: Point) -> Optional[int]:
        best, best_d = None, math.inf
        for i in alive:
            d = dist(pos[i], target)
            if d < best_d:
                best, best_d = i, d
        return best if best_d <= tol.eps_len else None

    lead = nearest(refs.leader)
    head = nearest(refs.r1)
    tail = nearest(refs.r2)
    if lead is None or head is None or tail is None:
        return None
    return (lead, head, tail)


# ---------------------------------------------------------------------------
# convergence

BOOTSTRAP_STAGES = {
    "Separation": 0,
    "LeaderTieBreak": 1,
    "Alignment": 2,
    "Placement": 3,
    "CircularConfig": 3,
    "Orientation": 4,
    "PatternFormation": 5,
    "ToCenter": 5,
    "Recovery": 5,
    "FlockMotion": 6,
}

# stages carrying a linear-rounds convergence claim: the ring build, the
# leader's orientation, and (re)formation of the pattern.  Scatter and
# election converge probabilistically, and parked motion is open ended.
MEASURED_STAGES = {3, 4, 5}


@dataclass
class PhaseEpisode:
    label: str
    first_event: int
    last_event: int
    first_round: int
    rounds: int


def phase_episodes(events: Sequence[Event]) -> list[PhaseEpisode]:
    """Contiguous stage blocks with their round spans.  Placement and the
    circular staging form one block, as do pattern formation and the
    leader's trip to the center, and the motion/recovery loop."""
    rounds = rounds_over(events)
    episodes: list[PhaseEpisode] = []
    cur_stage = None
    for ev, rnd in zip(events, rounds):
        if not ev.phase or ev.phase not in BOOTSTRAP_STAGES:
            continue
        stage = BOOTSTRAP_STAGES[ev.phase]
        if cur_stage is not None and stage == cur_stage:
            ep = episodes[-1]
            ep.last_event = ev.i
            ep.rounds = rnd - ep.first_round + 1
        else:
            episodes.append(PhaseEpisode(label=ev.phase, first_event=ev.i,
                                         last_event=ev.i, first_round=rnd,
                                         rounds=1))
            cur_stage = stage
    return episodes


def check_convergence(events: Sequence[Event], n: int, c: float = 4.0) -> Verdict:
    """Every ring-building, orientation and (re)formation episode must
    complete within c * n rounds."""
    episodes = phase_episodes(events)
    slow = []
    margin = math.inf
    bound = c * n
    for ep in episodes:
        if BOOTSTRAP_STAGES.get(ep.label) not in MEASURED_STAGES:
            continue
        m = bound - ep.rounds
        if m < margin:
            margin = m
        if ep.rounds > bound:
            slow.append({"label": ep.label, "first_event": ep.first_event,
                         "rounds": ep.rounds, "bound": bound})
    passed = not slow
    return Verdict("convergence", passed, margin,
                   None if passed else {"episodes": slow[:5]})


# ---------------------------------------------------------------------------
# pattern-formation progress and order preservation

def check_pattern_progress(events: Sequence[Event],
                           stall_limit: int = 5) -> Verdict:
    """Deadlock freedom, operationally: while a forming stage is under
    way, some robot commits motion within every ``stall_limit`` rounds.

    A lone enabled robot legitimately spends up to four rounds between
    visible steps: one clearing a stale observation, then one round each
    for its look, compute and first step under an adversarial schedule."""
    rounds = rounds_over(events)
    stalled = []
    in_block = False
    moved_in_round: dict[int, bool] = {}

    def flush(near_event: int) -> None:
        rr = sorted(moved_in_round)
        run = 0
        for r in rr[:-1]:  # the final round of a block ends by leaving it
            run = 0 if moved_in_round[r] else run + 1
            if run >= stall_limit:
                stalled.append({"round": r, "near_event": near_event})
                run = 0

    for ev, rnd in zip(events, rounds):
        forming = ev.phase in ("PatternFormation", "Placement", "CircularConfig")
        if forming and not in_block:
            in_block = True
            moved_in_round = {}
        elif not forming and in_block:
            in_block = False
            flush(ev.i)
        if in_block:
            moved_in_round.setdefault(rnd, False)
            if ev.kind == "move_step" and dist(ev.frm, ev.to) > 0:
                moved_in_round[rnd] = True
    if in_block:
        flush(events[-1].i)
    passed = not stalled
    return Verdict("pattern-progress", passed,
                   math.inf if passed else float(len(stalled)),
                   None if passed else {"stalls": stalled[:5]})


def check_order_preservation(events: Sequence[Event],
                             params: ProtocolParams) -> Verdict:
    """During pattern formation the shared-frame x order of the free
    robots never inverts (no overtaking)."""
    from .coordsys import common_frame

    prev_x: Optional[dict[int, float]] = None
    flips = []
    for ev, pos, alive in replay_positions(events):
        if ev.phase != "PatternFormation":
            prev_x = None
            continue
        if ev.kind not in ("move_step", "arrive", "compute"):
            continue
        pts = tuple(sorted(pos[i] for i in alive))
        if len(pts) < 4:
            continue
        tol = params.tolerance_for(pts)
        refs = extract_references(pts, tol)
        if refs is None:
            continue
        frame = common_frame(refs, tol)
        if not frame.determined:
            continue
        now_x: dict[int, float] = {}
        for i in sorted(alive):
            p = pos[i]
            if (dist(p, refs.leader) <= tol.eps_len or dist(p, refs.r1) <= tol.eps_len
                    or dist(p, refs.r2) <= tol.eps_len):
                continue
            now_x[i] = frame.x_of(p)
        if prev_x is not None and set(now_x) == set(prev_x):
            ids = sorted(now_x)
            for a_i in range(len(ids)):
                for b_i in range(a_i + 1, len(ids)):
                    a, b = ids[a_i], ids[b_i]
                    before = prev_x[a] - prev_x[b]
                    after = now_x[a] - now_x[b]
                    if (abs(before) > tol.eps_len and abs(after) > tol.eps_len
                            and (before > 0) != (after > 0)):
                        flips.append({"event": ev.i, "robots": [a, b]})
        prev_x = now_x
    passed = not flips
    return Verdict("order-preservation", passed,
                   math.inf if passed else float(len(flips)),
                   None if passed else {"flips": flips[:5]})
