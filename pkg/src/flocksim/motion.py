"""Velocity agreement: safe regions for the head and the pattern, the
wedge-angle validity calculus, and the moving-formation rules.

Region geometry, in the shared frame with the circle center at the
origin and the head on +y:

* steer region: above the upward cone with apex at the head, slopes
  +-steer_slope.  Legal waypoints for the head.
* pattern region: between the downward cone at the origin (slopes
  +-pattern_upper_slope) and the upward cone at the tail (slopes
  +-pattern_lower_slope).  Where the pattern must sit.

Both wedge angles must be at least a quarter turn (equivalently
steer_slope * pattern_lower_slope >= 1 and steer_slope *
pattern_upper_slope >= 1) for head moves to preserve containment and the
leader.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .geometry import (
    Point,
    Tolerance,
    add,
    angle_at,
    dist,
    mul,
    sub,
    unit,
)
from .coordsys import References, common_frame
from .formation import FlockPattern, free_robots, pattern_complete
from .params import Action, Move, MotionParams, ProtocolParams, Stay


def steer_region_contains(p: Point, motion: MotionParams, refs: References,
                          tol: Tolerance) -> bool:
    """Membership in the head's cone, boundary inclusive.

    ``p`` is given in snapshot coordinates; the test is evaluated in the
    shared frame (symmetric in x, so no orientation is needed)."""
    o = refs.center
    ey = refs.axis
    d = sub(p, o)
    y = d.x * ey.x + d.y * ey.y
    x = abs(-d.x * ey.y + d.y * ey.x)
    y_head = refs.radius
    return y >= motion.steer_slope * x + y_head - tol.eps_len


def pattern_region_contains(p: Point, motion: MotionParams, refs: References,
                            tol: Tolerance) -> bool:
    """Membership in the pattern wedge, boundary inclusive."""
    o = refs.center
    ey = refs.axis
    d = sub(p, o)
    y = d.x * ey.x + d.y * ey.y
    x = abs(-d.x * ey.y + d.y * ey.x)
    y_tail = -refs.radius
    if y > -motion.pattern_upper_slope * x + tol.eps_len:
        return False
    return y >= motion.pattern_lower_slope * x + y_tail - tol.eps_len


def validate_params(motion: MotionParams) -> dict:
    """Wedge angles between the region borders, measured geometrically,
    with the closed forms as the validity rule.

    containment_angle couples the steer cone with the pattern wedge's
    lower border; leadership_angle couples it with the upper border.
    Both must reach a quarter turn."""
    k = motion.steer_slope
    h = motion.pattern_lower_slope
    hp = motion.pattern_upper_slope
    # unit-radius canonical construction: head at (0,1), tail at (0,-1)
    head = Point(0.0, 1.0)
    tail = Point(0.0, -1.0)
    # A: intersection of y = h*x - 1 with y = -k*x + 1
    ax = 2.0 / (h + k)
    a = Point(ax, h * ax - 1.0)
    containment = angle_at(a, head, tail)
    # leadership: rays from the origin along y = k*x (x>0) and y = -hp*x (x>0)
    leadership = angle_at(Point(0.0, 0.0), Point(1.0, k), Point(1.0, -hp))
    valid = (k * h >= 1.0 - 1e-12) and (k * hp >= 1.0 - 1e-12)
    return {
        "containment_angle": containment,
        "leadership_angle": leadership,
        "valid": valid,
    }


def max_step_for_tail(points: Sequence[Point], refs: References,
                      tol: Tolerance) -> float:
    """Largest tail step toward the head that keeps every robot inside the
    shrunk circle.

    Per robot b the safe step is dist(head,tail)/2 - dist(head,b)/(2 cos d)
    with d the angle at the head between the tail and b; the binding robot
    is whichever minimizes it (for wedge-shaped placements that is usually,
    but not always, the robot nearest the tail)."""
    free = free_robots(points, refs, tol)
    if not free:
        raise ValueError("no non-reference robot to bound the step")
    spring = dist(refs.r1, refs.r2)
    bound = math.inf
    for b in free:
        delta = angle_at(refs.r1, refs.r2, b)
        c = math.cos(delta)
        if c <= 0.0:
            raise ValueError("robot behind the head: broken containment invariant")
        bound = min(bound, spring / 2.0 - dist(refs.r1, b) / (2.0 * c))
    return max(0.0, bound)


def is_flocking_formation(points: Sequence[Point], refs: Optional[References],
                          pattern: Optional[FlockPattern],
                          motion: MotionParams, tol: Tolerance) -> bool:
    """Leader at the center and every free robot on its fitted slot."""
    if refs is None or pattern is None:
        return False
    if dist(refs.leader, refs.center) > tol.eps_len:
        return False
    return pattern_complete(points, refs, pattern, motion, tol) is not None


def motion_action(me: Point, points: Sequence[Point], refs: References,
                  pattern: Optional[FlockPattern], params: ProtocolParams,
                  steer: Optional[Point], tol: Tolerance) -> Action:
    """The moving-formation rules: the head follows steer targets while the
    spring is slack; the tail catches up when it overextends.

    Only the head and tail ever move here; the leader's recovery and the
    pattern realignment are dispatched through their own phases."""
    m = params.motion
    if not is_flocking_formation(points, refs, pattern, m, tol):
        return Stay()
    spring = dist(refs.r1, refs.r2)
    i_am_head = dist(me, refs.r1) <= tol.eps_len
    i_am_tail = dist(me, refs.r2) <= tol.eps_len
    if i_am_head and spring < m.spring_limit:
        if steer is None:
            return Stay()
        if not validate_params(m)["valid"]:
            raise ValueError("unsafe parameters: refusing to move the head")
        if not steer_region_contains(steer, m, refs, tol):
            return Stay(steer_rejected=True)
        if dist(me, steer) <= tol.eps_len:
            return Stay(steer_rejected=True)
        return Move(steer, used_steer=True)
    if i_am_tail and spring >= m.spring_limit:
        if not validate_params(m)["valid"]:
            raise ValueError("unsafe parameters: refusing to move the tail")
        step = min(m.catchup_step, max_step_for_tail(points, refs, tol))
        if step <= tol.eps_len:
            return Stay()
        return Move(add(me, mul(unit(sub(refs.r1, me)), step)))
    return Stay()
