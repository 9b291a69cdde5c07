"""Planar geometry kernel: smallest enclosing circle, angles, containment
and intersection predicates shared by every protocol rule.

All functions are pure and operate on immutable values; they are safe to
call concurrently.
"""

from __future__ import annotations

import math
import random
from typing import Iterable, NamedTuple, Optional, Sequence


class Point(NamedTuple):
    x: float
    y: float


class Circle(NamedTuple):
    center: Point
    radius: float


class Tolerance(NamedTuple):
    """Absolute slacks for length and angle comparisons.

    The protocol treats geometry as exact; floating point needs explicit
    slack.  ``eps_len`` is an absolute length (usually resolved from a
    relative factor times the configuration span), ``eps_ang`` is radians.
    """

    eps_len: float
    eps_ang: float

    @classmethod
    def for_points(cls, points: Sequence[Point], rel: float = 1e-9,
                   eps_ang: float = 1e-9) -> "Tolerance":
        """Resolve a relative length tolerance against the bounding span."""
        span = bbox_span(points)
        return cls(eps_len=max(rel * span, 1e-300), eps_ang=eps_ang)


# ---------------------------------------------------------------------------
# vector helpers

def sub(a: Point, b: Point) -> Point:
    return Point(a.x - b.x, a.y - b.y)


def add(a: Point, b: Point) -> Point:
    return Point(a.x + b.x, a.y + b.y)


def mul(p: Point, s: float) -> Point:
    return Point(p.x * s, p.y * s)


def dot(a: Point, b: Point) -> float:
    return a.x * b.x + a.y * b.y


def cross(a: Point, b: Point) -> float:
    return a.x * b.y - a.y * b.x


def norm2(p: Point) -> float:
    return p.x * p.x + p.y * p.y


def norm(p: Point) -> float:
    return math.hypot(p.x, p.y)


def dist2(a: Point, b: Point) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    return dx * dx + dy * dy


def dist(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def midpoint(a: Point, b: Point) -> Point:
    return Point((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)


def unit(p: Point) -> Point:
    n = norm(p)
    if n == 0.0:
        raise ValueError("zero-length vector has no direction")
    return Point(p.x / n, p.y / n)


def rot90(p: Point) -> Point:
    """Counter-clockwise quarter turn."""
    return Point(-p.y, p.x)


def rotate(p: Point, angle: float) -> Point:
    c = math.cos(angle)
    s = math.sin(angle)
    return Point(c * p.x - s * p.y, s * p.x + c * p.y)


def lerp(a: Point, b: Point, t: float) -> Point:
    return Point(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)


def bbox_span(points: Sequence[Point]) -> float:
    """Diagonal of the bounding box; a cheap proxy for the diameter."""
    if not points:
        return 0.0
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    return math.hypot(max(xs) - min(xs), max(ys) - min(ys))


def finite(p: Point) -> bool:
    return math.isfinite(p.x) and math.isfinite(p.y)


# ---------------------------------------------------------------------------
# basic operations

def barycenter(points: Iterable[Point]) -> Point:
    pts = list(points)
    if not pts:
        raise ValueError("no points")
    return Point(sum(p.x for p in pts) / len(pts), sum(p.y for p in pts) / len(pts))


def angle_at(vertex: Point, p: Point, q: Point, tol: Optional[Tolerance] = None) -> float:
    """Unsigned angle in [0, pi] between rays vertex->p and vertex->q."""
    u = sub(p, vertex)
    v = sub(q, vertex)
    nu = norm(u)
    nv = norm(v)
    floor = tol.eps_len if tol is not None else 0.0
    if nu <= floor or nv <= floor:
        raise ValueError("degenerate angle")
    c = dot(u, v) / (nu * nv)
    c = max(-1.0, min(1.0, c))
    return math.acos(c)


def collinear(a: Point, b: Point, c: Point, tol: Tolerance) -> bool:
    """True when the normalized cross product of (b-a, c-a) is below the
    angular threshold.  Coincident points count as collinear."""
    u = sub(b, a)
    v = sub(c, a)
    nu = norm(u)
    nv = norm(v)
    if nu <= tol.eps_len or nv <= tol.eps_len:
        return True
    return abs(cross(u, v)) / (nu * nv) <= tol.eps_ang


def lined4(a: Point, b: Point, c: Point, d: Point, tol: Tolerance) -> bool:
    return (collinear(a, b, c, tol) and collinear(b, c, d, tol)
            and collinear(a, c, d, tol))


def ray_circle_intersection(origin: Point, direction: Point, c: Circle) -> Point:
    """Exit point of the ray when the origin is inside the circle, first
    hit when outside.  Raises when the ray misses."""
    d = unit(direction)
    oc = sub(origin, c.center)
    b = dot(oc, d)
    disc = b * b - (norm2(oc) - c.radius * c.radius)
    if disc < 0.0:
        raise ValueError("ray misses circle")
    root = math.sqrt(disc)
    t_near = -b - root
    t_far = -b + root
    if t_far < 0.0:
        raise ValueError("ray misses circle")
    inside = norm2(oc) <= c.radius * c.radius
    t = t_far if inside else (t_near if t_near >= 0.0 else t_far)
    return Point(origin.x + t * d.x, origin.y + t * d.y)


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ab = sub(b, a)
    denom = norm2(ab)
    if denom == 0.0:
        return dist(p, a)
    t = dot(sub(p, a), ab) / denom
    t = max(0.0, min(1.0, t))
    return dist(p, lerp(a, b, t))


def on_segment(p: Point, a: Point, b: Point, tol: Tolerance) -> bool:
    return point_segment_distance(p, a, b) <= tol.eps_len


def moving_points_min_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> float:
    """Closest approach of two points moving linearly over the same unit
    time interval (a0->a1 and b0->b1)."""
    d0 = sub(a0, b0)
    dv = sub(sub(a1, a0), sub(b1, b0))
    denom = norm2(dv)
    if denom == 0.0:
        return norm(d0)
    t = -dot(d0, dv) / denom
    t = max(0.0, min(1.0, t))
    return norm(add(d0, mul(dv, t)))


# ---------------------------------------------------------------------------
# smallest enclosing circle
#
# Randomized incremental construction, expected linear time.  The shuffle
# uses a private fixed-seed stream so results are reproducible for a given
# input ordering.

def smallest_enclosing_circle(points: Iterable[Point]) -> Circle:
    pts = [Point(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("no points")
    rng = random.Random(0x5EC0FFEE)
    shuffled = list(pts)
    rng.shuffle(shuffled)

    c: Optional[Circle] = None
    for i, p in enumerate(shuffled):
        if c is None or not _in_circle(c, p):
            c = _circle_one_point(shuffled[: i + 1], p)
    assert c is not None
    return c


def _in_circle(c: Circle, p: Point) -> bool:
    return dist(c.center, p) <= c.radius * (1.0 + 1e-12) + 1e-14


def _circle_one_point(points: Sequence[Point], p: Point) -> Circle:
    c = Circle(p, 0.0)
    for i, q in enumerate(points):
        if not _in_circle(c, q):
            if c.radius == 0.0:
                c = circle_from_diameter(p, q)
            else:
                c = _circle_two_points(points[: i + 1], p, q)
    return c


def _circle_two_points(points: Sequence[Point], p: Point, q: Point) -> Circle:
    circ = circle_from_diameter(p, q)
    left: Optional[Circle] = None
    right: Optional[Circle] = None
    pq = sub(q, p)
    for r in points:
        if _in_circle(circ, r):
            continue
        side = cross(pq, sub(r, p))
        c = circumcircle(p, q, r)
        if c is None:
            continue
        cside = cross(pq, sub(c.center, p))
        if side > 0.0 and (left is None or cside > cross(pq, sub(left.center, p))):
            left = c
        elif side < 0.0 and (right is None or cside < cross(pq, sub(right.center, p))):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right  # type: ignore[return-value]
    if right is None:
        return left
    return left if left.radius <= right.radius else right


def circle_from_diameter(a: Point, b: Point) -> Circle:
    c = midpoint(a, b)
    return Circle(c, max(dist(c, a), dist(c, b)))


def circumcircle(a: Point, b: Point, c: Point) -> Optional[Circle]:
    """Circle through three points, or None when they are collinear."""
    ox = (min(a.x, b.x, c.x) + max(a.x, b.x, c.x)) / 2.0
    oy = (min(a.y, b.y, c.y) + max(a.y, b.y, c.y)) / 2.0
    ax, ay = a.x - ox, a.y - oy
    bx, by = b.x - ox, b.y - oy
    cx, cy = c.x - ox, c.y - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    center = Point(x, y)
    r = max(dist(center, a), dist(center, b), dist(center, c))
    return Circle(center, r)


def on_circle(p: Point, c: Circle, tol: Tolerance) -> bool:
    return abs(dist(p, c.center) - c.radius) <= tol.eps_len


def inside_circle(p: Point, c: Circle, tol: Tolerance) -> bool:
    return dist(p, c.center) <= c.radius + tol.eps_len
