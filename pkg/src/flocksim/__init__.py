"""Deterministic simulator, trace verifier and live steering service for a
self-stabilizing, self-healing velocity-agreement protocol for oblivious
asynchronous robots."""

from .geometry import Circle, Point, Tolerance, smallest_enclosing_circle
from .params import Move, MotionParams, ProtocolParams, Stay
from .world import Event, LocalFrame, SchedulerConfig, Snapshot, World, read_trace, write_trace
from .coordsys import CommonFrame, References, common_frame, extract_references, far_robots
from .formation import FlockPattern, PatternBook, make_line_pattern, validate_pattern
from .motion import (
    is_flocking_formation,
    max_step_for_tail,
    pattern_region_contains,
    steer_region_contains,
    validate_params,
)
from .dispatch import AmbiguousConfiguration, Phase, classify, compute
from .verify import (
    Verdict,
    check_convergence,
    check_placement_conditions,
    check_no_collision,
    check_order_preservation,
    check_pattern_progress,
    check_reference_stability,
)
from .harness import Metrics, RunResult, Scenario, run_scenario

__all__ = [
    "AmbiguousConfiguration", "Circle", "CommonFrame", "Event", "FlockPattern",
    "LocalFrame", "Metrics", "MotionParams", "Move", "PatternBook", "Phase",
    "Point", "ProtocolParams", "References", "RunResult", "Scenario",
    "SchedulerConfig", "Snapshot", "Stay", "Tolerance", "Verdict", "World",
    "check_convergence", "check_placement_conditions", "check_no_collision",
    "check_order_preservation", "check_pattern_progress",
    "check_reference_stability", "classify", "common_frame", "compute",
    "extract_references", "far_robots", "is_flocking_formation",
    "make_line_pattern", "max_step_for_tail", "pattern_region_contains",
    "read_trace", "run_scenario", "smallest_enclosing_circle",
    "steer_region_contains", "validate_params", "validate_pattern",
    "write_trace",
]

__version__ = "0.1.0"
