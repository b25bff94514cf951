"""Disc-contact geometry shared by the fine simulator, the kinematic coarse
model, and the training loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Vec2

_EPS = 1e-12


@dataclass(frozen=True, slots=True)
class ContactSplit:
    """Partition of a pusher path into free and in-contact arc length."""

    d_free: float
    d_contact: float

    def __post_init__(self):
        if self.d_free < -_EPS or self.d_contact < -_EPS:
            raise ValueError("contact split components must be non-negative")

    @property
    def total(self) -> float:
        return self.d_free + self.d_contact

    @property
    def contact_fraction(self) -> float:
        """Fraction of the path spent in contact; 0 for a zero-length path."""
        t = self.total
        return self.d_contact / t if t > 0.0 else 0.0


def penetration_depth(center_a: Vec2, r_a: float, center_b: Vec2, r_b: float) -> float:
    """Overlap depth of two discs: max(0, (r_a + r_b) - distance).  Zero iff separated."""
    d = math.hypot(center_a[0] - center_b[0], center_a[1] - center_b[1])
    return max(0.0, (r_a + r_b) - d)


def ray_disc_interval(start: Vec2, motion: Vec2, center: Vec2,
                      radius: float) -> tuple[float, float] | None:
    """Arc-length interval [lo, hi] of the segment start -> start+motion inside
    the disc, clipped to the segment.  None when the segment misses the disc."""
    length = math.hypot(*motion)
    if length == 0.0:
        return None
    ux, uy = motion[0] / length, motion[1] / length
    fx, fy = start[0] - center[0], start[1] - center[1]
    b = fx * ux + fy * uy
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - c
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    lo = max(-b - root, 0.0)
    hi = min(-b + root, length)
    if hi <= lo:
        return None
    return lo, hi


def swept_contact_split(pusher_start: Vec2, pusher_motion: Vec2,
                        slider_center: Vec2, combined_radius: float) -> ContactSplit:
    """Split the pusher path into in-contact and free arc length against the
    Minkowski-sum disc of the (fixed) slider.

    The slider is treated as fixed at its start pose; a pusher starting in
    contact accrues contact length from the path origin.
    """
    length = math.hypot(*pusher_motion)
    interval = ray_disc_interval(pusher_start, pusher_motion, slider_center, combined_radius)
    if interval is None:
        return ContactSplit(d_free=length, d_contact=0.0)
    lo, hi = interval
    d_contact = hi - lo
    return ContactSplit(d_free=length - d_contact, d_contact=d_contact)


def contact_point_and_angle(pusher_center: Vec2, slider_center: Vec2,
                            pusher_velocity: Vec2,
                            slider_radius: float) -> tuple[Vec2, float]:
    """Contact point vector and signed pushing angle for a disc-disc contact.

    The contact point sits on the slider surface along the center-to-center
    line.  Returns (r_c, theta) where r_c points from the contact point to the
    slider center and theta is the signed (right-hand) angle from the pushing
    direction to r_c.  A pusher center coincident with the slider center is
    degenerate and yields r_c = (0, 0), theta = 0.
    """
    speed = math.hypot(*pusher_velocity)
    if speed <= 0.0:
        raise ValueError("contact angle undefined for zero pusher velocity")
    dx = pusher_center[0] - slider_center[0]
    dy = pusher_center[1] - slider_center[1]
    dist = math.hypot(dx, dy)
    if dist < _EPS:
        return (0.0, 0.0), 0.0
    # outward unit normal from slider center toward the pusher; the contact
    # point is slider_center + n * r, so r_c = -n * r
    nx, ny = dx / dist, dy / dist
    r_c = (-nx * slider_radius, -ny * slider_radius)
    vx, vy = pusher_velocity
    theta = math.atan2(vx * r_c[1] - vy * r_c[0], vx * r_c[0] + vy * r_c[1])
    return r_c, theta
