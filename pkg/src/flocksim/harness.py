"""Scenario-driven runner: load a configuration, simulate it to
completion, verify the trace, emit metrics, and render static plots.

Scenario files are JSON:

    {
      "seed": 7,
      "robots": [[x, y], ...]            # or
      "random": {"n": 8, "box": [-5, -5, 5, 5], "far_ties": 0},
      "pattern": "auto" | "path.json" | {...pattern object...},
      "params": {"steer_slope": 1.0, "pattern_lower_slope": 1.5, ...},
      "scheduler": {"mode": "async", "min_progress": 0.2,
                     "fairness_bound": 3, "seed": 7},
      "steering": [{"ahead": 0.3, "side": 0.1}, ...],
      "faults": [{"role": "R1", "round": 40}],
      "max_events": 60000
    }

Lengths are abstract units, angles radians.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Point, add, cross, dist, mul, rot90, sub, unit
from .coordsys import References, extract_references, far_robots
from .dispatch import compute
from .formation import FlockPattern, PatternBook, make_line_pattern, validate_pattern
from .motion import is_flocking_formation, validate_params
from .params import MotionParams, ProtocolParams
from .verify import (
    Verdict,
    check_convergence,
    check_placement_conditions,
    check_no_collision,
    check_order_preservation,
    check_pattern_progress,
    check_reference_stability,
    report,
    rounds_over,
)
from .world import Event, SchedulerConfig, World, read_trace, write_trace


@dataclass
class Scenario:
    seed: int = 0
    robots: Optional[list[Point]] = None
    random: Optional[dict] = None
    pattern: object = "auto"
    params: ProtocolParams = field(default_factory=ProtocolParams)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    steering: list[dict] = field(default_factory=list)
    faults: list[dict] = field(default_factory=list)
    max_events: int = 120_000
    identity_frames: bool = False

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "Scenario":
        params = _params_from_dict(d.get("params", {}))
        sched = d.get("scheduler", {})
        scheduler = SchedulerConfig(
            mode=sched.get("mode", "async"),
            min_progress=float(sched.get("min_progress", 0.2)),
            fairness_bound=int(sched.get("fairness_bound", 3)),
            seed=int(sched.get("seed", d.get("seed", 0))),
        )
        robots = None
        if d.get("robots") is not None:
            robots = [Point(float(p[0]), float(p[1])) for p in d["robots"]]
        pattern = d.get("pattern", "auto")
        if isinstance(pattern, str) and pattern != "auto":
            pattern = os.path.join(base_dir, pattern)
        return cls(
            seed=int(d.get("seed", 0)),
            robots=robots,
            random=d.get("random"),
            pattern=pattern,
            params=params,
            scheduler=scheduler,
            steering=list(d.get("steering", [])),
            faults=list(d.get("faults", [])),
            max_events=int(d.get("max_events", 120_000)),
            identity_frames=bool(d.get("identity_frames", False)),
        )

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=os.path.dirname(path) or ".")


def _params_from_dict(d: dict) -> ProtocolParams:
    motion = MotionParams(
        steer_slope=float(d.get("steer_slope", 1.0)),
        pattern_lower_slope=float(d.get("pattern_lower_slope", 1.5)),
        pattern_upper_slope=float(d.get("pattern_upper_slope", 1.5)),
        catchup_step=float(d.get("catchup_step", 0.1)),
        spring_limit=float(d.get("spring_limit", math.inf)),
        leader_offset=float(d.get("leader_offset", 0.5)),
    )
    return ProtocolParams(
        motion=motion,
        move_probability=float(d.get("move_probability", 0.5)),
        separation_cap=d.get("separation_cap"),
        eps_rel=float(d.get("eps_rel", 1e-9)),
        eps_ang=float(d.get("eps_ang", 1e-9)),
        clamp_rel=float(d.get("clamp_rel", 1e-8)),
        pattern_margin=float(d.get("pattern_margin", 0.05)),
    )


# ---------------------------------------------------------------------------
# initial configurations

def draw_initial_positions(spec: dict, seed: int) -> tuple[list[Point], int]:
    """Random configuration with degenerate draws rejected and redrawn.

    ``far_ties``: when >= 3, that many robots go on a regular polygon so
    the scatter phase has work to do; the rest land well inside."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0F)))
    n = int(spec["n"])
    box = spec.get("box", [-5.0, -5.0, 5.0, 5.0])
    ties = int(spec.get("far_ties", 0))
    redraws = 0
    for _ in range(1000):
        pts: list[Point] = []
        if ties >= 3:
            radius = 0.45 * min(box[2] - box[0], box[3] - box[1])
            cx = (box[0] + box[2]) / 2.0
            cy = (box[1] + box[3]) / 2.0
            phase = float(rng.uniform(0, 2 * math.pi))
            for i in range(ties):
                a = phase + 2 * math.pi * i / ties
                pts.append(Point(cx + radius * math.cos(a), cy + radius * math.sin(a)))
            for _ in range(n - ties):
                a = float(rng.uniform(0, 2 * math.pi))
                rr = radius * 0.4 * math.sqrt(float(rng.uniform(0, 1)))
                pts.append(Point(cx + rr * math.cos(a), cy + rr * math.sin(a)))
        else:
            for _ in range(n):
                pts.append(Point(float(rng.uniform(box[0], box[2])),
                                 float(rng.uniform(box[1], box[3]))))
        if _degenerate(pts):
            redraws += 1
            continue
        return pts, redraws
    raise ValueError("could not draw a non-degenerate configuration")


def _degenerate(pts: list[Point]) -> bool:
    span = max(dist(a, b) for a in pts for b in pts)
    if span <= 0:
        return True
    for i, a in enumerate(pts):
        for b in pts[i + 1:]:
            if dist(a, b) < 1e-6 * span:
                return True
    # all collinear?
    a, b = pts[0], pts[1]
    if all(abs(cross(sub(b, a), sub(c, a))) < 1e-9 * span * span for c in pts):
        return True
    return False


def build_pattern_book(scenario: Scenario, n: int) -> PatternBook:
    """Patterns for the scenario's robot count, plus one-robot-short
    fallbacks when faults may shrink the flock."""
    p = scenario.pattern
    params = scenario.params
    if isinstance(p, dict):
        pat = FlockPattern.from_dict(p)
        validate_pattern(pat, params)
        book = PatternBook({n: pat})
    elif isinstance(p, str) and p != "auto":
        pat = FlockPattern.load(p)
        validate_pattern(pat, params)
        book = PatternBook({n: pat})
    else:
        pat = make_line_pattern(n - 3, params.motion)
        validate_pattern(pat, params)
        book = PatternBook({n: pat})
    if scenario.faults and n - 4 >= 1:
        for k in range(1, len(scenario.faults) + 1):
            if n - 3 - k >= 1 and book.for_count(n - k) is None:
                fb = make_line_pattern(n - 3 - k, params.motion)
                validate_pattern(fb, params)
                book.add(n - k, fb)
    return book


# ---------------------------------------------------------------------------
# run loop

@dataclass
class Metrics:
    events: int = 0
    rounds: int = 0
    computes: int = 0
    separation_computes: Optional[int] = None
    bootstrap_rounds: Optional[int] = None
    formed: bool = False
    reformations: int = 0
    max_far_seen: int = 0
    redraws: int = 0
    steers_completed: int = 0
    faults_fired: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    scenario: Scenario
    events: list[Event]
    verdicts: list[Verdict]
    metrics: Metrics

    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _world_refs(world: World, params: ProtocolParams):
    snap = world.take_snapshot()
    tol = params.tolerance_for(snap.positions)
    return snap, tol, extract_references(snap.positions, tol)


def inject_fault(world: World, role, params: ProtocolParams) -> int:
    """Queue the crash of the robot currently holding a role (or a raw
    index).  Returns the victim's id."""
    if isinstance(role, int):
        victim = role
        if not world.robots[victim].alive:
            raise ValueError("target robot already dead")
    else:
        snap, tol, refs = _world_refs(world, params)
        if refs is None:
            raise ValueError(f"role {role!r} not resolvable: references "
                             "not recognizable")
        target = {"R1": refs.r1, "R2": refs.r2, "Leader": refs.leader}.get(role)
        if target is None:
            raise ValueError(f"unknown role {role!r}")
        victim = min((r for r in world.robots if r.alive),
                     key=lambda r: dist(r.position, target)).id
    world.queue_command({"kind": "crash", "robot": victim})
    return victim


class SteeringScript:
    """Feeds waypoints to the head one at a time.

    Waypoints are offsets from the head's position in the shared frame:
    ``ahead`` along the tail-to-head axis, ``side`` across it.  A waypoint
    is done once the head has arrived and the flock has re-formed; a
    rejected (stale) target is retried."""

    def __init__(self, waypoints: Sequence[dict]):
        self.waypoints = list(waypoints)
        self.index = 0
        self.pending_target: Optional[Point] = None
        self.completed = 0

    def done(self) -> bool:
        return self.index >= len(self.waypoints)

    def drive(self, world: World, params: ProtocolParams,
              book: PatternBook) -> None:
        if self.done() or world.pending_steer is not None:
            return
        snap, tol, refs = _world_refs(world, params)
        if refs is None:
            return
        pattern = book.for_count(len(snap.positions))
        if not is_flocking_formation(snap.positions, refs, pattern,
                                     params.motion, tol):
            return
        if any(r.phase_of_cycle == "moving" for r in world.robots if r.alive):
            return
        if self.pending_target is not None:
            if dist(refs.r1, self.pending_target) <= tol.eps_len:
                self.completed += 1
                self.index += 1
                self.pending_target = None
                if self.done():
                    return
            # else: the previous steer was dropped; re-issue
        spring = dist(refs.r1, refs.r2)
        if spring >= params.motion.spring_limit:
            return  # the tail must catch up first
        wp = self.waypoints[self.index]
        ey = refs.axis
        ex = rot90(ey)
        target = add(refs.r1, add(mul(ey, float(wp.get("ahead", 0.0))),
                                  mul(ex, float(wp.get("side", 0.0)))))
        world.queue_command({"kind": "steer", "target": [target.x, target.y]})
        self.pending_target = target


def run_scenario(scenario: Scenario, collect_placement: bool = True) -> RunResult:
    """Simulate the scenario to quiescence and verify the trace."""
    out = validate_params(scenario.params.motion)
    if not out["valid"]:
        raise ValueError("unsafe parameters: wedge angles below a quarter "
                         "turn (containment %.3f, leadership %.3f rad)"
                         % (out["containment_angle"], out["leadership_angle"]))
    if scenario.robots is not None:
        positions = list(scenario.robots)
        redraws = 0
    elif scenario.random is not None:
        positions, redraws = draw_initial_positions(scenario.random, scenario.seed)
    else:
        raise ValueError("scenario needs robots or a random spec")
    if _degenerate(positions):
        raise ValueError("degenerate initial configuration")
    n = len(positions)
    if n < 4:
        raise ValueError("need at least four robots")

    book = build_pattern_book(scenario, n)
    params = scenario.params
    if params.separation_cap is None:
        # default: scatter steps capped at four spans of the initial
        # configuration, keeping runaway separations renderable
        span = max(dist(a, b) for a in positions for b in positions)
        from dataclasses import replace
        params = replace(params, separation_cap=4.0 * span)
    world = World(positions, scenario.scheduler, params, seed=scenario.seed,
                  identity_frames=scenario.identity_frames)

    def dispatcher(points, local_params, rng, steer=None):
        return compute(points, book, local_params, rng, steer)

    script = SteeringScript(scenario.steering)
    fault_queue = sorted(scenario.faults, key=lambda f: f["round"])
    faults_fired = 0
    metrics = Metrics(redraws=redraws)
    # the placement conditions are a property of the (re)forming flock:
    # they are enforced from the first completed formation onward, with
    # each crash opening a fresh grace window
    placement_regime = False
    placement_bad: list[Verdict] = []
    placement_margins = [math.inf, math.inf, math.inf]

    separation_done_at: Optional[int] = None
    bootstrap_done_round: Optional[int] = None
    formed_once = False
    reformations = 0
    was_formed = False
    last_change_round = 0

    def world_formed() -> bool:
        snap, tol, refs = _world_refs(world, params)
        pattern = book.for_count(len(snap.positions))
        return refs is not None and is_flocking_formation(
            snap.positions, refs, pattern, params.motion, tol)

    while len(world.events) < scenario.max_events:
        while fault_queue and world.round_index >= fault_queue[0]["round"]:
            f = fault_queue.pop(0)
            inject_fault(world, f.get("role", f.get("robot")), params)
            faults_fired += 1
        script.drive(world, params, book)
        ev = world.step(dispatcher)

        snap = world.take_snapshot()
        tol = params.tolerance_for(snap.positions)
        if separation_done_at is None and len(snap.positions) >= 2:
            far = far_robots(snap.positions, tol)
            metrics.max_far_seen = max(metrics.max_far_seen, len(far))
            if len(far) <= 2:
                separation_done_at = world.computes
        if ev.kind == "crash":
            placement_regime = False
        if collect_placement and placement_regime and ev.kind == "look":
            refs = extract_references(snap.positions, tol)
            if refs is not None:
                for idx, v in enumerate(check_placement_conditions(snap.positions, refs, tol)):
                    placement_margins[idx] = min(placement_margins[idx], v.margin)
                    if not v.passed:
                        placement_bad.append(Verdict(v.check, False, v.margin,
                                                  {"event": ev.i, **(v.witness or {})}))

        if ev.kind in ("arrive", "compute"):
            now_formed = world_formed()
            if now_formed and not was_formed:
                placement_regime = True
                if formed_once:
                    reformations += 1
                else:
                    formed_once = True
                    bootstrap_done_round = world.round_index
            was_formed = now_formed

        if ev.kind == "move_step" and ev.frm != ev.to:
            last_change_round = world.round_index

        # once formed with nothing left to drive, two full rounds without
        # any motion (covering stale pending computes) end the run
        if (formed_once and script.done() and not fault_queue
                and world.pending_steer is None and was_formed
                and not any(r.phase_of_cycle == "moving" for r in world.robots if r.alive)
                and world.round_index - last_change_round >= 2):
            break

    events = world.events
    metrics.events = len(events)
    metrics.rounds = world.round_index
    metrics.computes = world.computes
    metrics.separation_computes = separation_done_at
    metrics.bootstrap_rounds = bootstrap_done_round
    metrics.formed = formed_once and was_formed
    metrics.reformations = reformations
    metrics.steers_completed = script.completed
    metrics.faults_fired = faults_fired

    verdicts = [
        check_no_collision(events, r_min=params.eps_rel * _span_of(events)),
        check_reference_stability(events, params),
        check_convergence(events, n),
        check_pattern_progress(events),
        check_order_preservation(events, params),
    ]
    if collect_placement:
        names = ["placement-inside-circle", "placement-tail-side",
                 "placement-leader-disc-empty"]
        for idx, name in enumerate(names):
            bad = [v for v in placement_bad if v.check == name]
            verdicts.append(Verdict(name, not bad, placement_margins[idx],
                                    bad[0].witness if bad else None))
    return RunResult(scenario=scenario, events=events, verdicts=verdicts,
                     metrics=metrics)


def _span_of(events: Sequence[Event]) -> float:
    xs = [ev.to.x for ev in events] or [0.0]
    ys = [ev.to.y for ev in events] or [0.0]
    return math.hypot(max(xs) - min(xs), max(ys) - min(ys)) or 1.0


# ---------------------------------------------------------------------------
# plotting

def plot_run(result: RunResult, path: str) -> None:
    """Static figure: trajectories, final circle, safe-region borders."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 7))
    by_robot: dict[int, list[Point]] = {}
    for ev in result.events:
        if ev.kind in ("move_step", "arrive", "look"):
            by_robot.setdefault(ev.robot, []).append(ev.to)
    for rid, pts in sorted(by_robot.items()):
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        ax.plot(xs, ys, lw=0.7, alpha=0.6)
        ax.plot(xs[-1:], ys[-1:], "o", ms=5)

    final_pos = {}
    alive = set()
    for ev in result.events:
        if ev.kind == "crash":
            alive.discard(ev.robot)
        else:
            final_pos[ev.robot] = ev.to
            alive.add(ev.robot)
    pts = tuple(sorted(final_pos[i] for i in alive))
    params = result.scenario.params
    tol = params.tolerance_for(pts)
    refs = extract_references(pts, tol)
    if refs is not None:
        th = np.linspace(0, 2 * math.pi, 128)
        ax.plot(refs.center.x + refs.radius * np.cos(th),
                refs.center.y + refs.radius * np.sin(th), "k--", lw=0.8)
        _plot_regions(ax, refs, params.motion)
    ax.set_aspect("equal")
    ax.set_title("trajectories")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def _plot_regions(ax, refs: References, motion: MotionParams) -> None:
    ey = refs.axis
    ex = rot90(ey)
    o = refs.center
    r = refs.radius
    span = 1.5 * r

    def to_global(x, y):
        return (o.x + x * ex.x + y * ey.x, o.y + x * ex.y + y * ey.y)

    xs = np.linspace(-span, span, 64)
    head = [to_global(x, motion.steer_slope * abs(x) + r) for x in xs]
    ax.plot([p[0] for p in head], [p[1] for p in head], color="tab:green", lw=1)
    upper = [to_global(x, -motion.pattern_upper_slope * abs(x)) for x in xs]
    lower = [to_global(x, motion.pattern_lower_slope * abs(x) - r) for x in xs]
    ax.plot([p[0] for p in upper], [p[1] for p in upper], color="tab:orange", lw=1)
    ax.plot([p[0] for p in lower], [p[1] for p in lower], color="tab:orange", lw=1)


# ---------------------------------------------------------------------------
# CLI

def _cmd_run(args) -> int:
    scenario = Scenario.load(args.scenario)
    result = run_scenario(scenario)
    if args.trace:
        write_trace(result.events, args.trace)
    if args.verdicts:
        with open(args.verdicts, "w") as fh:
            fh.write(report(result.verdicts))
    if args.plot:
        plot_run(result, args.plot)
    print(json.dumps(result.metrics.to_dict(), indent=2))
    for v in result.verdicts:
        state = "pass" if v.passed else "FAIL"
        print(f"[{state}] {v.check} (margin {v.margin:.3g})")
    return 0 if result.all_passed() else 1


def _run_one(path: str) -> tuple[str, dict, bool]:
    scenario = Scenario.load(path)
    result = run_scenario(scenario)
    return path, result.metrics.to_dict(), result.all_passed()


def _cmd_batch(args) -> int:
    paths = sorted(
        os.path.join(args.scenarios, f)
        for f in os.listdir(args.scenarios)
        if f.endswith(".json")
    )
    if not paths:
        print("no scenario files found", file=sys.stderr)
        return 2
    results = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, paths))
    else:
        results = [_run_one(p) for p in paths]
    ok = True
    for path, metrics, passed in results:
        ok = ok and passed
        state = "pass" if passed else "FAIL"
        print(f"[{state}] {os.path.basename(path)}: "
              f"events={metrics['events']} rounds={metrics['rounds']} "
              f"formed={metrics['formed']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "batch.json"), "w") as fh:
            json.dump([{"scenario": p, "metrics": m, "passed": ok_}
                       for p, m, ok_ in results], fh, indent=2)
    return 0 if ok else 1


def _cmd_check(args) -> int:
    events = read_trace(args.trace)
    params = ProtocolParams()
    r_min = args.r_min if args.r_min is not None else params.eps_rel * _span_of(events)
    verdicts = [
        check_no_collision(events, r_min=r_min),
        check_reference_stability(events, params),
        check_convergence(events, n=len({ev.robot for ev in events})),
        check_pattern_progress(events),
        check_order_preservation(events, params),
    ]
    print(report(verdicts))
    return 0 if all(v.passed for v in verdicts) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="flocksim",
                                     description="flocking protocol simulator")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--trace", default=None, help="write JSONL trace here")
    p_run.add_argument("--verdicts", default=None, help="write verdict JSON here")
    p_run.add_argument("--plot", default=None, help="write an SVG figure here")
    p_run.set_defaults(fn=_cmd_run)

    p_batch = sub.add_parser("batch", help="run every scenario in a directory")
    p_batch.add_argument("--scenarios", required=True)
    p_batch.add_argument("--jobs", type=int, default=1)
    p_batch.add_argument("--out", default=None)
    p_batch.set_defaults(fn=_cmd_batch)

    p_check = sub.add_parser("check", help="re-verify a trace file")
    p_check.add_argument("--trace", required=True)
    p_check.add_argument("--r-min", type=float, default=None)
    p_check.set_defaults(fn=_cmd_check)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
