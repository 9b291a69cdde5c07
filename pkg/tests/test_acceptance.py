"""Acceptance suite: every criterion exercised at its stated tolerance.

Each test prints one `ACCEPTANCE <n> ...: PASS/FAIL` line (visible with
`pytest -s` or in captured output).  The heavy scenario batches are run
once per session and shared.
"""

import math
import os
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from flocksim.geometry import (
    Circle,
    Point,
    Tolerance,
    angle_at,
    dist,
    midpoint,
    smallest_enclosing_circle,
    sub,
)
from flocksim.coordsys import References, extract_references
from flocksim.dispatch import compute
from flocksim.formation import PatternBook, free_robots, make_line_pattern
from flocksim.harness import Scenario, SteeringScript, run_scenario
from flocksim.motion import is_flocking_formation, max_step_for_tail
from flocksim.params import MotionParams, ProtocolParams
from flocksim.verify import check_no_collision, check_reference_stability
from flocksim.world import SchedulerConfig, World

from test_geometry import brute_force_sec

EPS = 1e-9
JOBS = min(2, os.cpu_count() or 1)


def _report(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# canonical sampling helpers for the region properties (unit circle, head up)

REFS = References(leader=Point(0.0, 0.0), r1=Point(0.0, 1.0),
                  r2=Point(0.0, -1.0), sec=Circle(Point(0.0, 0.0), 1.0))


def sample_head_target(rng, k, border=False, reach=3.0):
    x = float(rng.uniform(-reach, reach))
    y = k * abs(x) + 1.0
    if not border:
        y += float(rng.uniform(0, reach))
    return Point(x, y)


def sample_wedge_point(rng, h, hp, border=False):
    corner = 2.0 / (h + hp)
    for _ in range(10000):
        x = float(rng.uniform(-corner, corner))
        lo = h * abs(x) - 1.0
        hi = -hp * abs(x)
        if lo > hi:
            continue
        y = hi if border else float(rng.uniform(lo, hi))
        if x * x + y * y <= 1.0:
            return Point(x, y)
    raise AssertionError("wedge sampler starved")


# ---------------------------------------------------------------------------
# criterion 1: enclosing-circle oracle equivalence

class TestCriterion1:
    def test_sec_matches_brute_force(self):
        rng = random.Random(0xACCE1)
        t0 = time.time()
        worst = 0.0
        for _ in range(1000):
            n = rng.randint(1, 12)
            pts = [Point(rng.uniform(-10, 10), rng.uniform(-10, 10))
                   for _ in range(n)]
            got = smallest_enclosing_circle(pts)
            want = brute_force_sec(pts)
            scale = max(1.0, want.radius)
            err = max(abs(got.radius - want.radius) / scale,
                      dist(got.center, want.center) / scale)
            worst = max(worst, err)
        elapsed = time.time() - t0
        _report("1 (enclosing-circle oracle)",
                worst <= 1e-9 and elapsed < 10.0,
                f"worst rel err {worst:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion 2: head moves keep everyone inside the head-tail circle

class TestCriterion2:
    def test_containment_angle_rule(self):
        rng = np.random.default_rng(0xACCE2)
        t0 = time.time()
        violations = 0
        for i in range(10_000):
            k = math.exp(float(rng.uniform(math.log(0.4), math.log(3.0))))
            h = (1.0 / k) if i % 5 == 0 else (1.0 / k) * float(rng.uniform(1.0, 3.0))
            hp = max(1.0 / k, 0.4)
            r1p = sample_head_target(rng, k, border=rng.random() < 0.5,
                                     reach=float(rng.uniform(0.1, 20.0)))
            b = sample_wedge_point(rng, h, hp, border=rng.random() < 0.5)
            # containment in the circle over the new head and the tail
            if angle_at(b, r1p, REFS.r2) < math.pi / 2 - EPS:
                violations += 1
        found = 0
        k, h, hp = 1.0, 0.8, 1.0
        for _ in range(10_000):
            r1p = sample_head_target(rng, k, border=True,
                                     reach=float(rng.uniform(3.0, 40.0)))
            b = sample_wedge_point(rng, h, hp, border=False)
            x = math.copysign(abs(b.x), -r1p.x)
            b = Point(x, h * abs(x) - 1.0)
            if x * x + b.y * b.y > 1.0:
                continue
            if angle_at(b, r1p, REFS.r2) < math.pi / 2 - EPS:
                found += 1
        elapsed = time.time() - t0
        _report("2 (containment under head moves)",
                violations == 0 and found >= 1 and elapsed < 5.0,
                f"violations={violations}, counterexamples={found}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion 3: the tail's step bound

class TestCriterion3:
    def test_tail_step_bound(self):
        rng = np.random.default_rng(0xACCE3)
        tol = Tolerance(EPS, EPS)
        t0 = time.time()
        bad_preserve = 0
        for _ in range(10_000):
            k = math.exp(float(rng.uniform(math.log(0.4), math.log(3.0))))
            h = (1.0 / k) * float(rng.uniform(1.0, 3.0))
            hp = (1.0 / k) * float(rng.uniform(1.0, 3.0))
            robots = [sample_wedge_point(rng, h, hp)
                      for _ in range(int(rng.integers(1, 5)))]
            pts = [REFS.r1, REFS.r2, REFS.leader] + robots
            bound = max_step_for_tail(pts, REFS, tol)
            r2p = Point(0.0, -1.0 + bound)
            center = midpoint(REFS.r1, r2p)
            radius = dist(REFS.r1, r2p) / 2.0
            for b in robots:
                if dist(b, center) > radius + EPS:
                    bad_preserve += 1
                    break
        # boundary witness: a robot on the circle itself leaves no slack,
        # so overshooting the (zero) bound expels it
        bad_witness = 0
        for _ in range(10_000):
            delta = float(rng.uniform(math.radians(3), math.radians(60)))
            c = 2.0 * math.cos(delta)
            b = Point(c * math.sin(delta), 1.0 - c * math.cos(delta))
            pts = [REFS.r1, REFS.r2, REFS.leader, b]
            bound = max_step_for_tail(pts, REFS, tol)
            step = bound * 1.001 + 10 * EPS
            r2p = Point(0.0, -1.0 + step)
            center = midpoint(REFS.r1, r2p)
            radius = dist(REFS.r1, r2p) / 2.0
            if not dist(b, center) > radius + EPS:
                bad_witness += 1
        elapsed = time.time() - t0
        _report("3 (tail step bound)",
                bad_preserve == 0 and bad_witness == 0 and elapsed < 5.0,
                f"containment breaks={bad_preserve}, "
                f"missed witness violations={bad_witness}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion 4: the leader stays closest to the moving center

class TestCriterion4:
    def test_leader_preserved(self):
        rng = np.random.default_rng(0xACCE4)
        t0 = time.time()
        violations = 0
        for i in range(10_000):
            k = math.exp(float(rng.uniform(math.log(0.4), math.log(3.0))))
            hp = (1.0 / k) if i % 5 == 0 else (1.0 / k) * float(rng.uniform(1.0, 3.0))
            h = max(1.0 / k, 0.4)
            r1p = sample_head_target(rng, k, border=rng.random() < 0.5,
                                     reach=float(rng.uniform(0.1, 50.0)))
            b = sample_wedge_point(rng, h, hp, border=rng.random() < 0.5)
            op = midpoint(r1p, REFS.r2)
            if dist(REFS.leader, op) > dist(b, op) + EPS:
                violations += 1
        found = 0
        k, hp, h = 1.0, 0.8, 1.0
        for _ in range(10_000):
            r1p = sample_head_target(rng, k, border=True,
                                     reach=float(rng.uniform(2.0, 80.0)))
            x = math.copysign(float(rng.uniform(0.05, 1.0 / (h + hp))), r1p.x)
            b = Point(x, -hp * abs(x))
            if x * x + b.y * b.y > 1.0:
                continue
            op = midpoint(r1p, REFS.r2)
            if dist(REFS.leader, op) > dist(b, op) + EPS:
                found += 1
        elapsed = time.time() - t0
        _report("4 (leader preservation)",
                violations == 0 and found >= 1 and elapsed < 5.0,
                f"violations={violations}, counterexamples={found}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criteria 5, 6, 9: the end-to-end batches

def _batch_scenario(n: int, seed: int) -> dict:
    ties = [0, 3, 4][seed % 3]
    return {
        "seed": seed,
        "random": {"n": n, "box": [-5, -5, 5, 5],
                   "far_ties": ties if 3 <= ties <= n else 0},
        "pattern": "auto",
        "params": {"steer_slope": 1.0, "pattern_lower_slope": 1.5,
                   "pattern_upper_slope": 1.5},
        "scheduler": {"mode": "async", "min_progress": 0.2,
                      "fairness_bound": 3, "seed": seed},
        "max_events": 200_000,
    }


def _run_batch_entry(args):
    n, seed = args
    sc = Scenario.from_dict(_batch_scenario(n, seed))
    r = run_scenario(sc)
    return {
        "n": n,
        "seed": seed,
        "formed": r.metrics.formed,
        "separation_computes": r.metrics.separation_computes,
        "bootstrap_rounds": r.metrics.bootstrap_rounds,
        "verdicts": {v.check: (v.passed, str(v.witness)) for v in r.verdicts},
    }


BATCH_PLAN = ([(5, 300 + i) for i in range(34)]
              + [(8, 400 + i) for i in range(33)]
              + [(12, 500 + i) for i in range(33)])

RATIO_PLAN = [(16, 600 + i) for i in range(12)] + [(8, 700 + i) for i in range(12)]


@pytest.fixture(scope="session")
def bootstrap_batch():
    with ProcessPoolExecutor(max_workers=JOBS) as pool:
        return list(pool.map(_run_batch_entry, BATCH_PLAN))


@pytest.fixture(scope="session")
def ratio_batch():
    with ProcessPoolExecutor(max_workers=JOBS) as pool:
        return list(pool.map(_run_batch_entry, RATIO_PLAN))


class TestCriterion5:
    def test_bootstrap_batch(self, bootstrap_batch):
        assert len(bootstrap_batch) == 100
        sep_ok = 0
        completed = []
        problems = []
        for row in bootstrap_batch:
            n = row["n"]
            sep = row["separation_computes"]
            if sep is not None and sep <= 50 * n:
                sep_ok += 1
                completed.append(row)
            if sep is not None:
                if not row["formed"]:
                    problems.append((row["n"], row["seed"], "not formed"))
                for check in ("no-collision", "reference-stability",
                              "placement-inside-circle", "placement-tail-side",
                              "placement-leader-disc-empty"):
                    ok, witness = row["verdicts"][check]
                    if not ok:
                        problems.append((row["n"], row["seed"], check, witness))
        sep_rate = sep_ok / len(bootstrap_batch)
        ok = sep_rate >= 0.99 and not problems
        _report("5 (end-to-end bootstrap)", ok,
                f"separation rate {sep_rate:.2%}, "
                f"problems {problems[:3] if problems else 'none'}")


class TestCriterion6:
    def test_linear_convergence(self, bootstrap_batch, ratio_batch):
        slow = [(r['n'], r['seed'], r['verdicts']['convergence'][1])
                for r in bootstrap_batch + ratio_batch
                if not r["verdicts"]["convergence"][0]]
        med = {}
        for rows, n in ((bootstrap_batch, 5), (bootstrap_batch, 8),
                        (bootstrap_batch, 12), (ratio_batch, 16)):
            vals = [r["bootstrap_rounds"] for r in rows
                    if r["n"] == n and r["bootstrap_rounds"] is not None]
            if vals:
                med[n] = statistics.median(vals)
        ratio_rows = [r["bootstrap_rounds"] for r in ratio_batch
                      if r["n"] == 8 and r["bootstrap_rounds"] is not None]
        med8 = statistics.median(ratio_rows + [v for v in
                                               (med.get(8),) if v is not None])
        ratio = med[16] / med8 if med8 else math.inf
        ok = not slow and ratio < 3.0
        _report("6 (linear-rounds convergence)", ok,
                f"medians {med}, ratio16/8 {ratio:.2f}, "
                f"slow {slow[:3] if slow else 'none'}")


class TestCriterion9:
    def test_pattern_progress_and_order_everywhere(self, bootstrap_batch):
        bad = []
        for row in bootstrap_batch:
            for check in ("pattern-progress", "order-preservation"):
                ok, witness = row["verdicts"][check]
                if not ok:
                    bad.append((row["n"], row["seed"], check, witness))
        _report("9 (no deadlock, no overtaking)", not bad,
                f"violations {bad[:3] if bad else 'none'}")


# ---------------------------------------------------------------------------
# criterion 7: the velocity agreement loop restores the pose

def _normalized_pose(points, refs, params, tol):
    """Free-robot coordinates in the axis frame: origin at the tail, y
    along the axis, unit the head-tail distance, fixed chirality.

    Signed x makes the comparison mirror-sensitive: a reformation that
    flipped the pattern across the axis would show up as a failure."""
    ey = refs.axis
    length = dist(refs.r1, refs.r2)
    out = []
    for p in free_robots(points, refs, tol):
        d = sub(p, refs.r2)
        y = (d.x * ey.x + d.y * ey.y) / length
        x = (-d.x * ey.y + d.y * ey.x) / length
        out.append((x, y))
    return sorted(out)


class TestCriterion7:
    def test_ten_waypoint_loop(self):
        n, seed = 7, 777
        base = _batch_scenario(n, seed)
        base["random"]["far_ties"] = 0
        # stage 1: measure the formation diameter for this seed
        stage1 = Scenario.from_dict(base)
        r1 = run_scenario(stage1)
        assert r1.metrics.formed
        pts = _final_points(r1)
        params = stage1.params
        tol = params.tolerance_for(pts)
        refs = extract_references(pts, tol)
        diameter = dist(refs.r1, refs.r2)

        # stage 2: same seed, spring limited to 1.5x the formation
        # diameter, wedge products at 1.5, ten scripted waypoints
        spec = dict(base)
        spec["params"] = {"steer_slope": 1.0, "pattern_lower_slope": 1.5,
                          "pattern_upper_slope": 1.5,
                          "catchup_step": 0.25 * diameter,
                          "spring_limit": 1.5 * diameter}
        spec["steering"] = [{"ahead": 0.12 * diameter,
                             "side": (0.05 if i % 2 == 0 else -0.05) * diameter}
                            for i in range(10)]
        spec["max_events"] = 400_000
        scenario = Scenario.from_dict(spec)

        # drive manually to capture the pose after every completed waypoint
        from flocksim.harness import build_pattern_book, draw_initial_positions
        positions, _ = draw_initial_positions(scenario.random, scenario.seed)
        book = build_pattern_book(scenario, n)
        world = World(positions, scenario.scheduler, scenario.params,
                      seed=scenario.seed)

        def dispatcher(points, local_params, rng, steer=None):
            return compute(points, book, local_params, rng, steer)

        script = SteeringScript(scenario.steering)
        poses = []
        completed_seen = 0
        params2 = scenario.params
        for _ in range(scenario.max_events):
            script.drive(world, params2, book)
            if script.completed > completed_seen:
                completed_seen = script.completed
                snap = world.take_snapshot()
                tol = params2.tolerance_for(snap.positions)
                refs = extract_references(snap.positions, tol)
                poses.append(_normalized_pose(snap.positions, refs, params2, tol))
            if script.done():
                break
            world.step(dispatcher)
        # baseline pose at the first formation
        snap0 = None
        w0 = World(positions, scenario.scheduler, scenario.params,
                   seed=scenario.seed)
        for _ in range(scenario.max_events):
            w0.step(dispatcher)
            snap = w0.take_snapshot()
            tol = params2.tolerance_for(snap.positions)
            refs = extract_references(snap.positions, tol)
            pattern = book.for_count(len(snap.positions))
            if refs is not None and is_flocking_formation(
                    snap.positions, refs, pattern, params2.motion, tol):
                snap0 = _normalized_pose(snap.positions, refs, params2, tol)
                break
        assert snap0 is not None

        deviation = 0.0
        for pose in poses:
            for (x0, y0), (x1, y1) in zip(snap0, pose):
                deviation = max(deviation, abs(x0 - x1), abs(y0 - y1))
        verdict_nc = check_no_collision(world.events,
                                        r_min=EPS * diameter)
        ok = (script.completed == 10 and deviation <= 1e-6
              and verdict_nc.passed)
        _report("7 (velocity agreement loop)", ok,
                f"waypoints {script.completed}/10, pose dev {deviation:.2e}, "
                f"collisions {'none' if verdict_nc.passed else 'YES'}")


def _final_points(result):
    final = {}
    alive = set()
    for ev in result.events:
        if ev.kind == "crash":
            alive.discard(ev.robot)
        else:
            final[ev.robot] = ev.to
            alive.add(ev.robot)
    return tuple(sorted(final[i] for i in alive))


# ---------------------------------------------------------------------------
# criterion 8: the flock agrees on a new head after a crash

def _crash_run(seed: int) -> dict:
    n = 6
    spec = _batch_scenario(n, seed)
    spec["random"]["far_ties"] = 0
    spec["params"]["catchup_step"] = 0.3
    spec["params"]["spring_limit"] = 1e9
    scenario = Scenario.from_dict(spec)
    from flocksim.harness import build_pattern_book, draw_initial_positions
    positions, _ = draw_initial_positions(scenario.random, scenario.seed)
    scenario.faults = [{"role": "R1", "round": 10**9}]  # forces a fallback shape
    book = build_pattern_book(scenario, n)
    params = scenario.params
    world = World(positions, scenario.scheduler, params, seed=seed)

    def dispatcher(points, local_params, rng, steer=None):
        return compute(points, book, local_params, rng, steer)

    def formed():
        snap = world.take_snapshot()
        tol = params.tolerance_for(snap.positions)
        refs = extract_references(snap.positions, tol)
        pattern = book.for_count(len(snap.positions))
        return refs, tol, (refs is not None and is_flocking_formation(
            snap.positions, refs, pattern, params.motion, tol))

    # bootstrap
    ok = False
    for _ in range(200_000):
        world.step(dispatcher)
        if len(world.events) % 20 == 0:
            refs, tol, f = formed()
            if f:
                ok = True
                break
    if not ok:
        return {"seed": seed, "ok": False, "why": "no initial formation"}

    # steer the head and crash it mid-flight
    refs, tol, _ = formed()
    diameter = dist(refs.r1, refs.r2)
    target = Point(refs.r1.x + 0.15 * diameter * refs.axis.x,
                   refs.r1.y + 0.15 * diameter * refs.axis.y)
    world.queue_command({"kind": "steer", "target": [target.x, target.y]})
    head_id = min((r for r in world.robots if r.alive),
                  key=lambda r: dist(r.position, refs.r1)).id
    crashed = False
    for _ in range(100_000):
        world.step(dispatcher)
        head = world.robots[head_id]
        if head.alive and head.phase_of_cycle == "moving":
            world.queue_command({"kind": "crash", "robot": head_id})
            crashed = True
            break
    if not crashed:
        return {"seed": seed, "ok": False, "why": "head never moved"}

    # the survivors must agree on fresh references and re-form
    for _ in range(300_000):
        world.step(dispatcher)
        if len(world.events) % 25 == 0:
            refs, tol, f = formed()
            if f:
                nc = check_no_collision(world.events, r_min=EPS * diameter)
                stab = check_reference_stability(world.events, params)
                return {"seed": seed, "ok": nc.passed and stab.passed,
                        "why": ("" if nc.passed and stab.passed else
                                f"collision={nc.witness} stability={stab.witness}")}
    return {"seed": seed, "ok": False, "why": "no reformation"}


@pytest.fixture(scope="session")
def crash_batch():
    with ProcessPoolExecutor(max_workers=JOBS) as pool:
        return list(pool.map(_crash_run, range(800, 850)))


class TestCriterion8:
    def test_self_healing(self, crash_batch):
        bad = [r for r in crash_batch if not r["ok"]]
        _report("8 (self-healing head replacement)", not bad,
                f"{len(crash_batch) - len(bad)}/{len(crash_batch)} healed, "
                f"first failure {bad[0] if bad else 'none'}")
