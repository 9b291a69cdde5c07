"""Emergent common coordinate system: far-robot separation, leader
election tie-breaking, reference alignment, and extraction of the shared
frame from a snapshot.

All operations are pure functions of a snapshot expressed in an arbitrary
similarity frame; every predicate is built from distance ratios and
angles, so all robots reach the same conclusions from their own local
views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    Circle,
    Point,
    Tolerance,
    add,
    barycenter,
    collinear,
    cross,
    dist,
    lined4,
    mul,
    norm,
    rot90,
    rotate,
    smallest_enclosing_circle,
    sub,
    unit,
)
from .params import Action, Move, ProtocolParams, Stay


@dataclass(frozen=True)
class References:
    """The distinguished quadruple that induces the shared frame.

    ``r1`` is the flock head, ``r2`` the opposite anchor, ``leader`` the
    robot closest to the enclosing circle's center.
    """

    leader: Point
    r1: Point
    r2: Point
    sec: Circle

    @property
    def center(self) -> Point:
        return self.sec.center

    @property
    def radius(self) -> float:
        return self.sec.radius

    @property
    def axis(self) -> Point:
        """Unit vector from the center toward the head."""
        return unit(sub(self.r1, self.sec.center))


@dataclass(frozen=True)
class CommonFrame:
    """Shared frame: origin at the circle center, +y toward the head.

    The +x direction exists only when the leader sits off the head-tail
    line; until then only y-dependent quantities may be used.
    """

    origin: Point
    ey: Point
    ex: Optional[Point]

    @property
    def determined(self) -> bool:
        return self.ex is not None

    def y_of(self, p: Point) -> float:
        d = sub(p, self.origin)
        return d.x * self.ey.x + d.y * self.ey.y

    def x_of(self, p: Point) -> float:
        if self.ex is None:
            raise ValueError("x axis undetermined")
        d = sub(p, self.origin)
        return d.x * self.ex.x + d.y * self.ex.y

    def to_frame(self, p: Point) -> Point:
        return Point(self.x_of(p), self.y_of(p))

    def from_frame(self, p: Point) -> Point:
        if self.ex is None:
            raise ValueError("x axis undetermined")
        return Point(self.origin.x + p.x * self.ex.x + p.y * self.ey.x,
                     self.origin.y + p.x * self.ex.y + p.y * self.ey.y)


# ---------------------------------------------------------------------------
# far robots and separation

def far_robots(points: Sequence[Point], tol: Tolerance) -> list[Point]:
    """Robots participating in at least one maximum-distance pair."""
    if len(points) < 2:
        raise ValueError("need at least two robots")
    dmax = 0.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = dist(points[i], points[j])
            if d > dmax:
                dmax = d
    out = []
    for i, p in enumerate(points):
        hit = False
        for j, q in enumerate(points):
            if i != j and dist(p, q) >= dmax - tol.eps_len:
                hit = True
                break
        if hit:
            out.append(p)
    return out


def separation_action(me: Point, points: Sequence[Point], params: ProtocolParams,
                      rng: np.random.Generator, tol: Tolerance) -> Action:
    """Probabilistic scatter of the far set until only two robots realize
    the maximum distance."""
    far = far_robots(points, tol)
    if len(far) <= 2 or not _member(me, far, tol):
        return Stay()
    if rng.random() >= params.move_probability:
        return Stay()
    center = barycenter(far)
    away = sub(me, center)
    d_me = norm(away)
    if d_me <= tol.eps_len:
        return Stay()
    step = d_me * params.move_probability
    if params.separation_cap is not None:
        step = min(step, params.separation_cap)
    return Move(add(me, mul(unit(away), step)))


def _member(p: Point, group: Sequence[Point], tol: Tolerance) -> bool:
    return any(dist(p, q) <= tol.eps_len for q in group)


# ---------------------------------------------------------------------------
# leader election

def leader_candidates(points: Sequence[Point], sec: Circle,
                      tol: Tolerance) -> list[Point]:
    """Robots tied (within tolerance) for smallest distance to the center."""
    if sec.radius <= tol.eps_len:
        raise ValueError("degenerate: all robots coincident")
    dists = [dist(p, sec.center) for p in points]
    dmin = min(dists)
    return [p for p, d in zip(points, dists) if d <= dmin + tol.eps_len]


def elect_leader(points: Sequence[Point], tol: Tolerance) -> tuple[Optional[Point], list[Point]]:
    """Returns (leader, tied).  A unique leader iff exactly one robot is
    strictly closest to the enclosing circle's center."""
    if len(points) < 3:
        raise ValueError("need at least three robots")
    sec = smallest_enclosing_circle(points)
    tied = leader_candidates(points, sec, tol)
    if len(tied) == 1:
        return tied[0], tied
    return None, tied


def tie_break_action(me: Point, points: Sequence[Point],
                     rng: np.random.Generator, tol: Tolerance) -> Action:
    """Each tied robot flips a coin and moves halfway toward the center."""
    sec = smallest_enclosing_circle(points)
    tied = leader_candidates(points, sec, tol)
    if len(tied) <= 1 or not _member(me, tied, tol):
        return Stay()
    if rng.random() < 0.5:
        return Move(Point((me.x + sec.center.x) / 2.0, (me.y + sec.center.y) / 2.0))
    return Stay()


# ---------------------------------------------------------------------------
# choosing between the two far robots

def choose(a: Point, b: Point, tol: Tolerance) -> Point:
    """The candidate with larger y; ties on y break by larger x.

    Evaluated in the frame of whoever invokes it; only one robot ever acts
    on the result per configuration."""
    if abs(a.y - b.y) > tol.eps_len:
        return a if a.y > b.y else b
    if abs(a.x - b.x) > tol.eps_len:
        return a if a.x > b.x else b
    raise ValueError("symmetric candidates")


# ---------------------------------------------------------------------------
# alignment of the references

def alignment_action(me: Point, points: Sequence[Point], params: ProtocolParams,
                     tol: Tolerance) -> Action:
    """Drive the two far robots onto the enclosing circle, diametrally
    opposed, with the leader on their line.

    Rule 1: a far robot off the circle exits radially.  Rule 3: an
    unaligned leader moves onto the ray toward its chosen far robot,
    keeping its distance to the center.  Rule 4: when the leader lines up
    with one far robot, the other one walks the circle to the antipode.
    """
    far = far_robots(points, tol)
    if len(far) != 2:
        raise ValueError("wrong phase: need exactly two far robots")
    leader, _tied = elect_leader(points, tol)
    if leader is None:
        raise ValueError("wrong phase: no unique leader")
    sec = smallest_enclosing_circle(points)
    o = sec.center
    r_a, r_b = far

    i_am_far = _member(me, far, tol)
    i_am_leader = dist(me, leader) <= tol.eps_len

    # rule 1: far robots belong on the circle
    if i_am_far and abs(dist(me, o) - sec.radius) > tol.eps_len:
        if dist(me, o) <= tol.eps_len:
            return Stay()
        return Move(add(o, mul(unit(sub(me, o)), sec.radius)))

    if lined4(r_a, r_b, leader, o, tol):
        return Stay()

    a_lined = collinear(r_a, leader, o, tol)
    b_lined = collinear(r_b, leader, o, tol)

    # rule 3: the leader orients the line by aligning with its choice
    if i_am_leader and not a_lined and not b_lined:
        d_lo = dist(leader, o)
        if d_lo <= tol.eps_len:
            # degenerate: a leader at the exact center has no ray to follow;
            # nudge it toward the chosen far robot, staying strictly closest
            target_dir = unit(sub(choose(r_a, r_b, tol), o))
            others = [p for p in points if dist(p, me) > tol.eps_len]
            d_kick = 0.5 * min(dist(p, o) for p in others)
            return Move(add(o, mul(target_dir, d_kick)))
        x = choose(r_a, r_b, tol)
        return Move(add(o, mul(unit(sub(x, o)), d_lo)))

    # rule 4: the not-chosen far robot walks the arc to the antipode
    if i_am_far and len(far) == 2:
        other = r_b if dist(me, r_a) <= tol.eps_len else r_a
        me_lined = collinear(me, leader, o, tol)
        other_lined = collinear(other, leader, o, tol)
        if other_lined and not me_lined:
            target = add(o, mul(unit(sub(o, other)), sec.radius))
            return arc_move(me, target, sec, dist(leader, o), tol)

    return Stay()


def arc_move(me: Point, target: Point, sec: Circle, protect_radius: float,
             tol: Tolerance) -> Action:
    """A bounded hop along the circle toward ``target``.

    Motion is realized as a chord; the subtended angle is capped so the
    chord never comes closer to the center than the protected radius
    (where it would upset the leader's closest-to-center status).
    """
    o = sec.center
    if dist(me, target) <= tol.eps_len:
        return Stay()
    a0 = math.atan2(me.y - o.y, me.x - o.x)
    a1 = math.atan2(target.y - o.y, target.x - o.x)
    delta = _wrap_angle(a1 - a0)
    ratio = min(1.0, max(0.0, protect_radius / max(sec.radius, tol.eps_len)) * 1.05)
    max_span = 2.0 * math.acos(ratio) if ratio < 1.0 else math.pi / 16
    max_span = max(min(max_span, math.pi * 0.95), math.pi / 16)
    if abs(delta) > max_span:
        delta = math.copysign(max_span, delta)
    hop = add(o, rotate(sub(me, o), delta))
    # land exactly on the circle at the hop angle
    hop = add(o, mul(unit(sub(hop, o)), sec.radius))
    return Move(hop)


def _wrap_angle(a: float) -> float:
    while a > math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a


# ---------------------------------------------------------------------------
# reference extraction

def extract_references(points: Sequence[Point], tol: Tolerance) -> Optional[References]:
    """Recognize the leader / head / tail triple, or None.

    Identification of head vs tail: when every non-reference robot is
    strictly nearer one far robot, that far robot is the tail (the
    pattern gathers around it); otherwise a leader sitting strictly
    between the center and one far robot marks that robot as the head.
    """
    if len(points) < 4:
        return None
    far = far_robots(points, tol)
    if len(far) != 2:
        return None
    f_a, f_b = far
    sec = smallest_enclosing_circle(points)
    o = sec.center
    if sec.radius <= tol.eps_len:
        return None
    if abs(dist(f_a, o) - sec.radius) > tol.eps_len:
        return None
    if abs(dist(f_b, o) - sec.radius) > tol.eps_len:
        return None
    if dist(f_a, f_b) < 2.0 * sec.radius - 2.0 * tol.eps_len:
        return None

    tied = leader_candidates(points, sec, tol)
    if len(tied) != 1:
        return None
    leader = tied[0]
    if _member(leader, far, tol):
        return None
    if dist(leader, o) >= sec.radius - tol.eps_len:
        return None

    free = [p for p in points
            if not _member(p, far, tol) and dist(p, leader) > tol.eps_len]
    if not free:
        return None

    # crowd rule: unanimously nearer far robot is the tail
    near_a = all(dist(p, f_a) < dist(p, f_b) - tol.eps_len for p in free)
    near_b = all(dist(p, f_b) < dist(p, f_a) - tol.eps_len for p in free)
    if near_a:
        return References(leader=leader, r1=f_b, r2=f_a, sec=sec)
    if near_b:
        return References(leader=leader, r1=f_a, r2=f_b, sec=sec)

    # fallback: leader strictly between the center and one far robot
    if lined4(f_a, f_b, leader, o, tol) and dist(leader, o) > tol.eps_len:
        d_a, d_b = dist(leader, f_a), dist(leader, f_b)
        if abs(d_a - d_b) <= tol.eps_len:
            return None
        head = f_a if d_a < d_b else f_b
        tail = f_b if head is f_a else f_a
        return References(leader=leader, r1=head, r2=tail, sec=sec)
    return None


def common_frame(refs: References, tol: Tolerance) -> CommonFrame:
    """Build the shared frame; +x exists only once the leader is off the
    head-tail line, on the leader's side."""
    o = refs.center
    ey = refs.axis
    off = sub(refs.leader, o)
    # signed perpendicular distance of the leader from the head-tail line
    side = cross(ey, off)
    if abs(side) <= tol.eps_len:
        return CommonFrame(origin=o, ey=ey, ex=None)
    # rotate ey a quarter turn toward the leader's half-plane
    ex = rot90(ey) if side > 0 else mul(rot90(ey), -1.0)
    return CommonFrame(origin=o, ey=ey, ex=ex)
