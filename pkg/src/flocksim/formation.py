"""Collision-free placement onto the enclosing circle, the circular
staging configuration around the tail, and total-order pattern formation
onto the anchor points.

Pattern files are JSON objects {"points": [[x,y],...], "anchor_o": [x,y],
"anchor_r2": [x,y]} in an arbitrary pattern space; a similarity transform
(no reflection) pins anchor_r2 to the tail robot and anchor_o to the
leader's perpendicular offset point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import (
    Point,
    Tolerance,
    add,
    angle_at,
    cross,
    dist,
    mul,
    norm,
    on_segment,
    rotate,
    sub,
    unit,
)
from .coordsys import CommonFrame, References, arc_move, choose, common_frame
from .params import Action, Move, MotionParams, ProtocolParams, Stay


# ---------------------------------------------------------------------------
# the pattern and its validation

@dataclass(frozen=True)
class FlockPattern:
    """Input shape for the non-reference robots plus its two anchors."""

    points: tuple[Point, ...]
    anchor_o: Point
    anchor_r2: Point

    @classmethod
    def from_dict(cls, d: dict) -> "FlockPattern":
        return cls(points=tuple(Point(*p) for p in d["points"]),
                   anchor_o=Point(*d["anchor_o"]),
                   anchor_r2=Point(*d["anchor_r2"]))

    def to_dict(self) -> dict:
        return {"points": [[p.x, p.y] for p in self.points],
                "anchor_o": [self.anchor_o.x, self.anchor_o.y],
                "anchor_r2": [self.anchor_r2.x, self.anchor_r2.y]}

    @classmethod
    def load(cls, path: str) -> "FlockPattern":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def normalized_pattern_points(pattern: FlockPattern, motion: MotionParams) -> list[Point]:
    """Map pattern space into the canonical frame (center origin, radius 1,
    tail at (0,-1), anchor point at (offset, 0))."""
    t_r2 = Point(0.0, -1.0)
    t_o = Point(motion.leader_offset, 0.0)
    return _fit_points(pattern, t_r2, t_o)


def _fit_points(pattern: FlockPattern, t_r2: Point, t_o: Point) -> list[Point]:
    """Similarity (rotation + scale, no reflection) sending anchor_r2 to
    t_r2 and anchor_o to t_o, applied to the pattern points."""
    src = sub(pattern.anchor_o, pattern.anchor_r2)
    dst = sub(t_o, t_r2)
    denom = norm(src) ** 2
    if denom == 0.0:
        raise ValueError("anchor-degenerate: anchors coincide")
    # complex division dst/src
    a = (dst.x * src.x + dst.y * src.y) / denom
    b = (dst.y * src.x - dst.x * src.y) / denom
    out = []
    for p in pattern.points:
        v = sub(p, pattern.anchor_r2)
        out.append(Point(t_r2.x + a * v.x - b * v.y,
                         t_r2.y + b * v.x + a * v.y))
    return out


def validate_pattern(pattern: FlockPattern, params: ProtocolParams) -> list[Point]:
    """Check the fitted pattern satisfies the placement conditions; returns
    the normalized points or raises naming the violated condition."""
    m = params.motion
    margin = params.pattern_margin
    pts = normalized_pattern_points(pattern, m)
    if not pts:
        raise ValueError("empty pattern")
    lam = m.leader_offset
    for i, p in enumerate(pts):
        for j in range(i + 1, len(pts)):
            if dist(p, pts[j]) < 1e-12:
                raise ValueError(f"duplicate-point: indices {i} and {j}")
    for i, p in enumerate(pts):
        if norm(p) > 1.0 - margin:
            raise ValueError(f"outside-enclosing-circle: point {i}")
        if p.y > -(lam + margin):
            raise ValueError(f"not-on-tail-side: point {i} must sit below the "
                             f"leader-offset depth {-(lam + margin):.3f}")
        if p.y > -m.pattern_upper_slope * abs(p.x):
            raise ValueError(f"outside-pattern-region: point {i} above the upper wedge")
        if p.y < m.pattern_lower_slope * abs(p.x) - 1.0:
            raise ValueError(f"outside-pattern-region: point {i} below the lower wedge")
        if dist(p, Point(0.0, -1.0)) < margin:
            raise ValueError(f"touches-anchor: point {i} too close to the tail")
    # the ordering clamp needs distinct x with a workable gap
    span = max(dist(a, b) for a in pts for b in pts) if len(pts) > 1 else 1.0
    eps_clamp = params.clamp_rel * max(span, 1e-9)
    xs = sorted(p.x for p in pts)
    for a, b in zip(xs, xs[1:]):
        if b - a <= eps_clamp:
            raise ValueError("x-gap-too-small: consecutive pattern points "
                             "closer in x than the ordering clamp")
    return pts


def make_line_pattern(n: int, motion: MotionParams, depth: float = -0.68) -> FlockPattern:
    """A valid default pattern: n points on a shallow arc inside the wedge."""
    if n < 1:
        raise ValueError("need at least one pattern point")
    lam = motion.leader_offset
    depth = min(depth, -(lam + 0.1))
    xmax = min(-depth / motion.pattern_upper_slope,
               (1.0 + depth) / motion.pattern_lower_slope) * 0.8
    pts = []
    for i in range(n):
        t = 0.5 if n == 1 else i / (n - 1)
        x = -xmax + 2 * xmax * t
        y = depth - 0.05 * math.cos(math.pi * t)
        pts.append(Point(x, y))
    return FlockPattern(points=tuple(pts), anchor_o=Point(lam, 0.0),
                        anchor_r2=Point(0.0, -1.0))


class PatternBook:
    """Patterns keyed by the observed robot count; oblivious robots select
    the shape matching the cardinality they can see."""

    def __init__(self, by_count: dict[int, FlockPattern]):
        self._by_count = dict(by_count)

    @classmethod
    def single(cls, n_robots: int, pattern: FlockPattern) -> "PatternBook":
        return cls({n_robots: pattern})

    def for_count(self, n_robots: int) -> Optional[FlockPattern]:
        return self._by_count.get(n_robots)

    def counts(self) -> list[int]:
        return sorted(self._by_count)

    def add(self, n_robots: int, pattern: FlockPattern) -> None:
        self._by_count[n_robots] = pattern


def pattern_targets(pattern: FlockPattern, refs: References,
                    motion: MotionParams, side_ex: Point) -> list[Point]:
    """Fitted pattern positions in snapshot coordinates.

    ``side_ex`` is the +x direction of the shared frame (unit vector,
    perpendicular to the head axis)."""
    pts = normalized_pattern_points(pattern, motion)
    o = refs.center
    r = refs.radius
    ey = refs.axis
    return [Point(o.x + (p.x * side_ex.x + p.y * ey.x) * r,
                  o.y + (p.x * side_ex.y + p.y * ey.y) * r)
            for p in pts]


def pattern_complete(points: Sequence[Point], refs: References,
                     pattern: FlockPattern, motion: MotionParams,
                     tol: Tolerance) -> Optional[Point]:
    """If the free robots occupy the fitted pattern on either side of the
    axis, returns that side's +x unit vector, else None."""
    free = free_robots(points, refs, tol)
    if len(free) != len(pattern.points):
        return None
    ey = refs.axis
    for side in (1.0, -1.0):
        ex = mul(Point(-ey.y, ey.x), side)
        targets = pattern_targets(pattern, refs, motion, ex)
        if _matched(free, targets, tol):
            return ex
    return None


def _matched(robots: Sequence[Point], targets: Sequence[Point], tol: Tolerance) -> bool:
    used = [False] * len(robots)
    for t in targets:
        hit = None
        for i, p in enumerate(robots):
            if not used[i] and dist(p, t) <= tol.eps_len:
                hit = i
                break
        if hit is None:
            return False
        used[hit] = True
    return all(used)


def free_robots(points: Sequence[Point], refs: References, tol: Tolerance) -> list[Point]:
    """All robots except the three references."""
    out = []
    taken = [refs.leader, refs.r1, refs.r2]
    flags = [False, False, False]
    for p in points:
        matched = False
        for k, t in enumerate(taken):
            if not flags[k] and dist(p, t) <= tol.eps_len:
                flags[k] = True
                matched = True
                break
        if not matched:
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# phase: placement onto the enclosing circle

def placement_action(me: Point, points: Sequence[Point], refs: References,
                     handedness_probe: float, tol: Tolerance) -> Action:
    """Move radially onto the circle when the way out is clear; when the
    radial slot is taken, dodge a quarter of the free arc clockwise.

    ``handedness_probe`` fixes what "clockwise" means for this robot; it
    is +1 or -1 and private to the mover.
    """
    o = refs.center
    r = refs.radius
    d_border = r - dist(me, o)
    if dist(me, refs.leader) <= tol.eps_len:
        return Stay()
    if d_border <= tol.eps_len:
        return Stay()  # already placed
    if dist(me, o) <= tol.eps_len:
        return Stay()  # exact center has no radius to follow

    others = [p for p in points if dist(p, me) > tol.eps_len]

    def on_my_radius_beyond(p: Point) -> bool:
        # strictly outward of me along my radius, up to and including the border
        v = sub(me, o)
        w = sub(p, o)
        if cross(v, w) != 0.0 and abs(cross(v, w)) / (norm(v) * max(norm(w), tol.eps_len)) > tol.eps_ang:
            return False
        t = (w.x * v.x + w.y * v.y) / (v.x * v.x + v.y * v.y)
        return t > 1.0 and norm(w) <= r + tol.eps_len

    blockers = [p for p in others if on_my_radius_beyond(p)]
    free_to_move = not blockers

    if free_to_move:
        return Move(add(o, mul(unit(sub(me, o)), r)))

    # rule 2 applies only to the robots nearest the border once nobody is
    # free to move, and only when the radial slot itself is occupied
    off = [p for p in points
           if r - dist(p, o) > tol.eps_len and dist(p, refs.leader) > tol.eps_len]
    if any(_free_to_move(p, points, o, r, tol) for p in off):
        return Stay()
    d_min = min(r - dist(p, o) for p in off)
    if d_border > d_min + tol.eps_len:
        return Stay()
    slot = add(o, mul(unit(sub(me, o)), r))
    occupier = next((p for p in others
                     if abs(dist(p, o) - r) <= tol.eps_len and dist(p, slot) <= tol.eps_len), None)
    if occupier is None:
        return Stay()
    # nearest circle robot clockwise of my radius, in my own chirality
    my_angle = math.atan2(me.y - o.y, me.x - o.x)
    best = None
    best_gap = None
    for p in others:
        if abs(dist(p, o) - r) > tol.eps_len or dist(p, slot) <= tol.eps_len:
            continue
        ang = math.atan2(p.y - o.y, p.x - o.x)
        gap = (my_angle - ang) * handedness_probe
        gap = gap % (2.0 * math.pi)
        if gap <= tol.eps_ang:
            continue
        if best_gap is None or gap < best_gap:
            best_gap = gap
            best = p
    if best is None:
        best_gap = 2.0 * math.pi
    target_angle = my_angle - handedness_probe * (best_gap / 4.0)
    target = add(o, Point(r * math.cos(target_angle), r * math.sin(target_angle)))
    return Move(target)


def _free_to_move(p: Point, points: Sequence[Point], o: Point, r: float,
                  tol: Tolerance) -> bool:
    v = sub(p, o)
    nv = norm(v)
    if nv <= tol.eps_len or r - nv <= tol.eps_len:
        return False
    for q in points:
        if dist(q, p) <= tol.eps_len:
            continue
        w = sub(q, o)
        if abs(cross(v, w)) / (nv * max(norm(w), tol.eps_len)) > tol.eps_ang:
            continue
        t = (w.x * v.x + w.y * v.y) / (nv * nv)
        if t > 1.0 and norm(w) <= r + tol.eps_len:
            return False
    return True


# ---------------------------------------------------------------------------
# phase: circular staging around the tail

def final_positions(refs: References, m: int, side_sign: float) -> list[Point]:
    """The m staging slots on one quarter arc adjacent to the tail.

    The slots and the tail are equidistant along the quarter: spacing is a
    quarter turn divided by m+1, measured from the tail toward the
    equator, endpoints excluded.  Ordered nearest-the-head first.
    ``side_sign`` picks the semicircle: +1 for the side where the cross
    product of the axis with the offset is positive.
    """
    if m < 0:
        raise ValueError("negative robot count")
    o = refs.center
    tail = sub(refs.r2, o)
    out = []
    step = (math.pi / 2.0) / (m + 1)
    for j in range(m, 0, -1):
        # rotating the tail against the side's cross sign walks toward the
        # equator on that side
        ang = -side_sign * step * j
        out.append(add(o, rotate(tail, ang)))
    return out


def side_of(p: Point, refs: References) -> float:
    """Which semicircle a robot occupies: sign of the cross product of the
    head axis with its offset from the center."""
    return 1.0 if cross(refs.axis, sub(p, refs.center)) > 0.0 else -1.0


def circular_config_action(me: Point, points: Sequence[Point], refs: References,
                           tol: Tolerance) -> Action:
    """Walk the circle into my staging slot once the path is clear."""
    o = refs.center
    r = refs.radius
    if dist(me, refs.leader) <= tol.eps_len:
        return Stay()
    if dist(me, refs.r1) <= tol.eps_len or dist(me, refs.r2) <= tol.eps_len:
        return Stay()
    if abs(dist(me, o) - r) > tol.eps_len:
        return Stay()  # wrong phase for this robot

    my_side = side_of(me, refs)
    mates = [p for p in free_robots(points, refs, tol)
             if side_of(p, refs) == my_side and abs(dist(p, o) - r) <= tol.eps_len]
    m = len(mates)
    slots = final_positions(refs, m, my_side)

    def head_gap(p: Point) -> float:
        return angle_at(o, refs.r1, p)

    rank = 1 + sum(1 for p in mates
                   if dist(p, me) > tol.eps_len and head_gap(p) < head_gap(me))
    target = slots[rank - 1]
    if dist(me, target) <= tol.eps_len:
        return Stay()
    lo, hi = sorted((head_gap(me), head_gap(target)))
    for p in mates:
        if dist(p, me) <= tol.eps_len:
            continue
        g = head_gap(p)
        if lo + tol.eps_ang < g < hi - tol.eps_ang:
            return Stay()  # blocked: somebody sits on my arc
    return arc_move(me, target, refs.sec, dist(refs.leader, o), tol)


def staging_complete(points: Sequence[Point], refs: References,
                     tol: Tolerance) -> bool:
    """True when every free robot occupies a staging slot on its side."""
    free = free_robots(points, refs, tol)
    for side in (1.0, -1.0):
        group = [p for p in free if side_of(p, refs) == side]
        if not all(abs(dist(p, refs.center) - refs.radius) <= tol.eps_len for p in group):
            return False
        slots = final_positions(refs, len(group), side)
        if not _matched(group, slots, tol):
            return False
    return True


# ---------------------------------------------------------------------------
# phase: pattern formation in the shared frame

def next_order(p: Point, q: Point, tol: Tolerance) -> bool:
    """Strict total order on distinct points: smaller x first, ties on x
    break by smaller y.  Coordinates must be in the shared frame."""
    if abs(p.x - q.x) <= tol.eps_len:
        if abs(p.y - q.y) <= tol.eps_len:
            raise ValueError("identical points")
        return p.y < q.y
    return p.x < q.x


def _order_key(tol: Tolerance):
    # next_order as a sort key; exact coordinates suffice because ties are
    # broken on y and true duplicates are rejected upstream
    def key(p: Point):
        return (p.x, p.y)
    return key


def pattern_action(me: Point, points: Sequence[Point], refs: References,
                   pattern: FlockPattern, params: ProtocolParams,
                   tol: Tolerance) -> Action:
    """Rank free robots and free positions in the shared order and move
    toward my slot without ever overtaking my order neighbours."""
    frame = common_frame(refs, tol)
    if not frame.determined:
        raise ValueError("wrong phase: shared x axis undetermined")
    m = params.motion
    free = free_robots(points, refs, tol)
    if len(free) != len(pattern.points):
        raise ValueError("pattern size mismatch")
    if not any(dist(me, p) <= tol.eps_len for p in free):
        return Stay()

    targets = pattern_targets(pattern, refs, m, frame.ex)
    # robots already on a target hold it; the rest pair up in order
    span = max((dist(a, b) for a in targets for b in targets), default=1.0)
    eps_clamp = params.clamp_rel * max(span, tol.eps_len)

    placed_robots = [False] * len(free)
    open_targets = []
    for t in targets:
        hit = None
        for i, p in enumerate(free):
            if not placed_robots[i] and dist(p, t) <= tol.eps_len:
                hit = i
                break
        if hit is None:
            open_targets.append(t)
        else:
            placed_robots[hit] = True
    movers = [p for i, p in enumerate(free) if not placed_robots[i]]

    me_moving = any(dist(me, p) <= tol.eps_len for p in movers)
    if not me_moving:
        return Stay()

    key = _order_key(tol)
    movers_f = sorted((frame.to_frame(p) for p in movers), key=key)
    targets_f = sorted((frame.to_frame(t) for t in open_targets), key=key)
    me_f = frame.to_frame(me)
    idx = min(range(len(movers_f)), key=lambda i: dist(movers_f[i], me_f))
    my_target_f = targets_f[idx]

    # rule 1: my slot on somebody else's trajectory -> wait
    my_target = frame.from_frame(my_target_f)
    for i, (rob_f, tgt_f) in enumerate(zip(movers_f, targets_f)):
        if i == idx:
            continue
        if on_segment(my_target_f, rob_f, tgt_f, tol):
            return Stay()

    # rule 2: clamp against order neighbours so nobody overtakes
    stop_x = my_target_f.x
    moving_right = my_target_f.x > me_f.x + tol.eps_len
    moving_left = my_target_f.x < me_f.x - tol.eps_len
    if moving_right and idx + 1 < len(movers_f):
        succ_x = movers_f[idx + 1].x
        stop_x = min(stop_x, succ_x - eps_clamp)
        if stop_x <= me_f.x + tol.eps_len:
            return Stay()
    if moving_left and idx - 1 >= 0:
        pred_x = movers_f[idx - 1].x
        stop_x = max(stop_x, pred_x + eps_clamp)
        if stop_x >= me_f.x - tol.eps_len:
            return Stay()
    if not moving_right and not moving_left:
        # purely vertical approach
        if dist(me_f, my_target_f) <= tol.eps_len:
            return Stay()
        return Move(my_target)
    t = (stop_x - me_f.x) / (my_target_f.x - me_f.x)
    t = max(0.0, min(1.0, t))
    stop_f = Point(me_f.x + (my_target_f.x - me_f.x) * t,
                   me_f.y + (my_target_f.y - me_f.y) * t)
    if dist(stop_f, me_f) <= tol.eps_len:
        return Stay()
    return Move(frame.from_frame(stop_f))


# ---------------------------------------------------------------------------
# the leader's own moves

def _rework_cost(robots: Sequence[Point], targets: Sequence[Point]) -> float:
    """Total travel if each robot heads for its nearest open slot; a cheap
    lower bound good enough to compare the two mirror placements."""
    return sum(min(dist(p, t) for t in targets) for p in robots)


def leader_orientation_action(me: Point, points: Sequence[Point],
                              refs: References, motion: MotionParams,
                              tol: Tolerance,
                              pattern: Optional[FlockPattern] = None) -> Action:
    """Move the leader perpendicular to the head-tail axis at the standard
    offset.

    The side is chosen so the resulting pattern placement is the one the
    free robots are already closest to, so a re-orientation never mirrors
    an existing placement; without a clear preference the leader keeps its
    current side, or picks one by its own view when it sits on the line."""
    if dist(me, refs.leader) > tol.eps_len:
        return Stay()
    o = refs.center
    ey = refs.axis
    lam = motion.leader_offset
    r = refs.radius
    ex0 = Point(-ey.y, ey.x)
    t_plus = add(o, mul(ex0, lam * r))
    t_minus = add(o, mul(ex0, -lam * r))

    target = None
    if pattern is not None:
        free = free_robots(points, refs, tol)
        if len(free) == len(pattern.points):
            cost_plus = _rework_cost(free, pattern_targets(pattern, refs,
                                                           motion, ex0))
            cost_minus = _rework_cost(free, pattern_targets(pattern, refs,
                                                            motion, mul(ex0, -1.0)))
            margin = tol.eps_len * max(1.0, r)
            if abs(cost_plus - cost_minus) > margin:
                target = t_plus if cost_plus < cost_minus else t_minus
    if target is None:
        side = cross(ey, sub(me, o))
        if abs(side) > tol.eps_len:
            target = t_plus if side > 0 else t_minus
        else:
            # on the line: either side is globally consistent, only the
            # leader acts; pick by its own view
            target = choose(t_plus, t_minus, tol)
    if dist(me, target) <= tol.eps_len:
        return Stay()
    return Move(target)


def leader_to_center_action(me: Point, refs: References, tol: Tolerance) -> Action:
    if dist(me, refs.leader) > tol.eps_len:
        return Stay()
    if dist(me, refs.center) <= tol.eps_len:
        return Stay()
    return Move(refs.center)
