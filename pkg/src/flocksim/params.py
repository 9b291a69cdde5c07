"""Protocol parameters: safe-region slopes, step lengths and tolerances.

Length-typed parameters are expressed in abstract world units; the
simulation core rescales them into each robot's local units before a
compute so that all robots agree on the physical quantities regardless of
their private unit of length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .geometry import Point, Tolerance


@dataclass(frozen=True)
class MotionParams:
    """Safe-region and spring parameters for the moving formation.

    steer_slope bounds the cone of legal head waypoints, the two pattern
    slopes bound the wedge the pattern must occupy, catchup_step is the
    tail's step length and spring_limit the head-tail extension that
    triggers it.
    """

    steer_slope: float = 1.0          # cone above the head
    pattern_lower_slope: float = 1.5  # wedge border rising from the tail
    pattern_upper_slope: float = 1.5  # wedge border descending from the center
    catchup_step: float = 0.1
    spring_limit: float = math.inf
    leader_offset: float = 0.5        # leader's perpendicular offset, fraction of radius

    def __post_init__(self) -> None:
        if self.steer_slope <= 0 or self.pattern_lower_slope <= 0 or self.pattern_upper_slope <= 0:
            raise ValueError("slopes must be positive")
        if self.catchup_step <= 0:
            raise ValueError("catchup_step must be positive")
        if not 0 < self.leader_offset < 1:
            raise ValueError("leader_offset must be in (0, 1)")


@dataclass(frozen=True)
class ProtocolParams:
    """Everything a robot's program is configured with."""

    motion: MotionParams = MotionParams()
    move_probability: float = 0.5       # separation coin bias
    separation_cap: Optional[float] = None  # max separation step, world units
    eps_rel: float = 1e-9               # length slack, relative to span
    eps_ang: float = 1e-9               # angular slack, radians
    clamp_rel: float = 1e-8             # ordering clamp, relative to pattern span
    pattern_margin: float = 0.05        # load-time validation margin, normalized

    def __post_init__(self) -> None:
        if not 0 < self.move_probability <= 1:
            raise ValueError("move_probability must be in (0, 1]")
        if self.separation_cap is not None and self.separation_cap <= 0:
            raise ValueError("separation_cap must be positive")

    def in_local_units(self, unit_scale: float) -> "ProtocolParams":
        """Rescale length-typed fields into a frame with the given unit."""
        if unit_scale == 1.0:
            return self
        m = self.motion
        motion = replace(
            m,
            catchup_step=m.catchup_step / unit_scale,
            spring_limit=m.spring_limit / unit_scale,
        )
        cap = None if self.separation_cap is None else self.separation_cap / unit_scale
        return replace(self, motion=motion, separation_cap=cap)

    def tolerance_for(self, points) -> Tolerance:
        return Tolerance.for_points(points, rel=self.eps_rel, eps_ang=self.eps_ang)


@dataclass(frozen=True)
class Move:
    """Commanded destination, in the frame of the snapshot that produced it."""

    target: Point
    phase: str = ""
    used_steer: bool = False


@dataclass(frozen=True)
class Stay:
    phase: str = ""
    # set when the robot holding the steer examined and refused it, so the
    # stale target can be discarded instead of pending forever
    steer_rejected: bool = False


Action = Move | Stay
