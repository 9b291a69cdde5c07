"""The oblivious per-robot program: classify the observed configuration
into a protocol phase and delegate to that phase's rule.

Classification is a pure function of the snapshot; it is built entirely
from distance ratios and angles, so every robot reaches the same label
from its own local view of the same instant.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .geometry import Point, Tolerance, cross, dist, norm, smallest_enclosing_circle, sub
from .coordsys import (
    References,
    alignment_action,
    common_frame,
    elect_leader,
    extract_references,
    far_robots,
    leader_candidates,
    separation_action,
    tie_break_action,
)
from .formation import (
    FlockPattern,
    PatternBook,
    circular_config_action,
    free_robots,
    leader_orientation_action,
    leader_to_center_action,
    pattern_action,
    pattern_complete,
    placement_action,
    staging_complete,
)
from .motion import is_flocking_formation, motion_action
from .params import Action, Move, ProtocolParams, Stay


class Phase(str, Enum):
    SEPARATION = "Separation"
    LEADER_TIE_BREAK = "LeaderTieBreak"
    ALIGNMENT = "Alignment"
    PLACEMENT = "Placement"
    CIRCULAR_CONFIG = "CircularConfig"
    ORIENTATION = "Orientation"
    PATTERN_FORMATION = "PatternFormation"
    TO_CENTER = "ToCenter"
    FLOCK_MOTION = "FlockMotion"
    RECOVERY = "Recovery"


class AmbiguousConfiguration(ValueError):
    """The cascade could not place the snapshot in any phase."""


@dataclass(frozen=True)
class Classified:
    phase: Phase
    refs: Optional[References] = None
    pattern: Optional[FlockPattern] = None


def classify(points: Sequence[Point], patterns: PatternBook,
             params: ProtocolParams) -> Classified:
    """Priority cascade over geometric predicates.

    Scatter until two robots realize the maximum distance; break leader
    ties; align the references; then bootstrap (ring placement, staging,
    orientation) or run the pattern/motion loop depending on where the
    leader stands.
    """
    n = len(points)
    if n < 4:
        raise ValueError("need at least four robots")
    tol = params.tolerance_for(points)

    far = far_robots(points, tol)
    if len(far) > 2:
        return Classified(Phase.SEPARATION)

    sec = smallest_enclosing_circle(points)
    if sec.radius <= tol.eps_len:
        raise AmbiguousConfiguration("all robots coincident")
    tied = leader_candidates(points, sec, tol)
    if len(tied) > 1:
        return Classified(Phase.LEADER_TIE_BREAK)

    refs = extract_references(points, tol)
    if refs is None:
        return Classified(Phase.ALIGNMENT)

    pattern = patterns.for_count(n)
    m = params.motion

    complete = (pattern is not None
                and pattern_complete(points, refs, pattern, m, tol) is not None)
    leader_off = sub(refs.leader, refs.center)
    at_center = norm(leader_off) <= tol.eps_len
    if complete:
        if at_center:
            return Classified(Phase.FLOCK_MOTION, refs, pattern)
        return Classified(Phase.TO_CENTER, refs, pattern)

    # pattern incomplete from here on
    perp = cross(refs.axis, leader_off)
    on_line = abs(perp) <= tol.eps_len
    at_offset = (not on_line
                 and abs(abs(perp) - m.leader_offset * refs.radius) <= tol.eps_len
                 and abs(leader_off.x * refs.axis.x + leader_off.y * refs.axis.y) <= tol.eps_len)
    if at_offset:
        if pattern is None:
            raise ValueError("pattern size mismatch: no shape for "
                             f"{n} robots")
        return Classified(Phase.PATTERN_FORMATION, refs, pattern)

    free = free_robots(points, refs, tol)
    all_on_ring = all(abs(dist(p, refs.center) - refs.radius) <= tol.eps_len
                      for p in free)
    if on_line:
        if all_on_ring:
            if staging_complete(points, refs, tol):
                return Classified(Phase.ORIENTATION, refs, pattern)
            return Classified(Phase.CIRCULAR_CONFIG, refs, pattern)
        if _staged_for_pattern(points, refs, free, params, tol):
            return Classified(Phase.RECOVERY, refs, pattern)
        return Classified(Phase.PLACEMENT, refs, pattern)

    # leader strictly off the line but not at the standard offset: it is
    # (re)orienting; everyone else waits
    if all_on_ring:
        return Classified(Phase.ORIENTATION, refs, pattern)
    if _staged_for_pattern(points, refs, free, params, tol):
        return Classified(Phase.RECOVERY, refs, pattern)
    return Classified(Phase.PLACEMENT, refs, pattern)


def _staged_for_pattern(points: Sequence[Point], refs: References,
                        free: Sequence[Point], params: ProtocolParams,
                        tol: Tolerance) -> bool:
    """Free robots strictly inside the circle on the tail's side, clear of
    the leader's offset reach: the pattern can re-form directly with no
    ring rebuild, and the leader's orientation move cannot lose its
    closest-to-center status mid-flight."""
    o = refs.center
    ey = refs.axis
    reach = params.motion.leader_offset * refs.radius
    for p in free:
        d = sub(p, o)
        y = d.x * ey.x + d.y * ey.y
        if y >= -tol.eps_len:
            return False
        r_p = dist(p, o)
        if r_p >= refs.radius - tol.eps_len:
            return False
        if r_p <= reach + tol.eps_len:
            return False
        if not (dist(p, refs.r2) < dist(p, refs.r1) - tol.eps_len):
            return False
    return True


def compute(points: Sequence[Point], patterns: PatternBook,
            params: ProtocolParams, rng: np.random.Generator,
            steer: Optional[Point] = None) -> Action:
    """One look-compute decision: returns the destination (or Stay) for
    the robot observing ``points`` from its own frame (self at the
    origin)."""
    pts = tuple(sorted(Point(float(p[0]), float(p[1])) for p in points))
    tol = params.tolerance_for(pts)
    me = min(pts, key=norm2_key)
    if norm(me) > tol.eps_len:
        raise ValueError("own position missing from the snapshot")

    cls = classify(pts, patterns, params)
    phase = cls.phase
    if phase is Phase.SEPARATION:
        act = separation_action(me, pts, params, rng, tol)
    elif phase is Phase.LEADER_TIE_BREAK:
        act = tie_break_action(me, pts, rng, tol)
    elif phase is Phase.ALIGNMENT:
        act = alignment_action(me, pts, params, tol)
    elif phase is Phase.PLACEMENT:
        act = placement_action(me, pts, cls.refs, 1.0, tol)
    elif phase is Phase.CIRCULAR_CONFIG:
        act = circular_config_action(me, pts, cls.refs, tol)
    elif phase is Phase.ORIENTATION or phase is Phase.RECOVERY:
        act = leader_orientation_action(me, pts, cls.refs, params.motion, tol,
                                        pattern=cls.pattern)
    elif phase is Phase.PATTERN_FORMATION:
        act = pattern_action(me, pts, cls.refs, cls.pattern, params, tol)
    elif phase is Phase.TO_CENTER:
        act = leader_to_center_action(me, cls.refs, tol)
    elif phase is Phase.FLOCK_MOTION:
        act = motion_action(me, pts, cls.refs, cls.pattern, params, steer, tol)
    else:  # pragma: no cover - the cascade is total
        raise AmbiguousConfiguration(f"unhandled phase {phase}")

    if isinstance(act, Move):
        return Move(act.target, phase=phase.value, used_steer=act.used_steer)
    return Stay(phase=phase.value, steer_rejected=act.steer_rejected)


def norm2_key(p: Point) -> float:
    return p.x * p.x + p.y * p.y
