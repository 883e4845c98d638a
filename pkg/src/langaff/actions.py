"""Grasp and push primitives derived from affordance maps and masks.

Angle conventions: axis angles live in (-90, 90] degrees, measured from the
image x axis (columns) with the image y axis pointing up (negated rows), so
a mask and the world polygon that produced it report the same tilt. The
grasp angle is the short-edge tilt of the minimum-area box, which is the
long-axis tilt plus 90 wrapped back into range.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .camera import pixel_to_world
from .data import AffordanceMap, CameraModel, DepthMap, ObjectMask
from .errors import DegenerateDirection, DepthMissing, EmptyMask, TargetMismatch
from .geometry import min_area_rect, wrap_axis_angle

PUSH_LENGTH_M = 0.13       # every push travels exactly this far
GRASP_DESCEND_M = 0.02     # gripper closes this far below the surface height
MIN_PUSH_PLANAR_M = 1e-3   # start and end must differ by at least 1 mm in plane


@dataclass(frozen=True)
class GraspAction:
    """Top-down parallel-jaw grasp: middle position plus rotation angle."""

    position: tuple[float, float, float]
    angle_deg: float

    def __post_init__(self):
        if not (-90.0 < self.angle_deg <= 90.0):
            raise ValueError(f"grasp angle {self.angle_deg} outside (-90, 90]")

    def serialize(self) -> str:
        x, y, z = self.position
        return f"grasp\tposition_m\t{x:.6f} {y:.6f} {z:.6f}\tangle_deg\t{self.angle_deg:.3f}"


@dataclass(frozen=True)
class PushAction:
    """Straight fixed-length push: start point plus in-plane unit direction."""

    start: tuple[float, float, float]
    direction: tuple[float, float, float]
    length_m: float = PUSH_LENGTH_M

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
            raise ValueError("push direction must be a unit vector")
        if d[2] != 0.0:
            raise ValueError("push direction must lie in the table plane")
        if self.length_m != PUSH_LENGTH_M:
            raise ValueError(f"push length is fixed at {PUSH_LENGTH_M} m")

    def serialize(self) -> str:
        x, y, z = self.start
        dx, dy, dz = self.direction
        return (
            f"push\tposition_m\t{x:.6f} {y:.6f} {z:.6f}\t"
            f"direction\t{dx:.9f} {dy:.9f} {dz:.9f}\tlength_m\t{self.length_m}"
        )


def _mask_points_math(mask: ObjectMask) -> np.ndarray:
    """Foreground pixel centers in the math frame (x=col, y=-row)."""
    rows, cols = np.nonzero(mask.bits)
    if rows.size == 0:
        raise EmptyMask(f"mask {mask.category!r} has no foreground pixels")
    return np.stack([cols.astype(np.float64), -rows.astype(np.float64)], axis=1)


def oriented_box(mask: ObjectMask) -> tuple[tuple[float, float], float, float, float]:
    """Minimum-area rotated rectangle around the mask foreground.

    Returns (center (row, col), long side px, short side px, long-axis tilt
    degrees in (-90, 90]). Pixels count as unit squares: side lengths are the
    pixel-center extents plus one, exact for axis-aligned rectangles.
    """
    pts = _mask_points_math(mask)
    center_math, long_side, short_side, angle = min_area_rect(pts)
    center_rc = (float(-center_math[1]), float(center_math[0]))
    return center_rc, long_side + 1.0, short_side + 1.0, angle


def grasp_angle(mask: ObjectMask) -> float:
    """Short-edge tilt of the mask's minimum-area box, in (-90, 90].

    For a square box the long axis is ambiguous; the candidate with the
    smaller absolute angle wins, and an exact tie goes to the non-negative
    one.
    """
    pts = _mask_points_math(mask)
    _, long_side, short_side, angle = min_area_rect(pts)
    if abs(long_side - short_side) < 1e-9:
        cand = sorted(
            (wrap_axis_angle(angle + 90.0), wrap_axis_angle(angle)),
            key=lambda a: (abs(a), -a),
        )
        return cand[0]
    return wrap_axis_angle(angle + 90.0)


def make_grasp(
    affordance: AffordanceMap,
    depth: DepthMap | None,
    mask: ObjectMask,
    camera: CameraModel,
) -> GraspAction:
    """Grasp at the affordance peak, angled across the mask's short edge.

    The peak is restricted to the mask when the global argmax falls outside
    it (with a TargetMismatch warning). z descends 2 cm below the surface
    height at the grasp pixel, clamped at the table.
    """
    if depth is None:
        raise DepthMissing("grasping needs a depth map for the descend height")
    if mask.foreground_count() == 0:
        raise EmptyMask(f"mask {mask.category!r} has no foreground pixels")
    peak = affordance.argmax_pixel()
    if not mask.bits[peak]:
        warnings.warn(
            f"affordance peak {peak} outside target mask; restricting to mask",
            TargetMismatch,
        )
        masked = np.where(mask.bits, affordance.values, -np.inf)
        r, c = np.unravel_index(int(np.argmax(masked)), masked.shape)
        peak = (int(r), int(c))
    point = pixel_to_world(peak, depth, camera)
    surface_h = float(depth.depths[peak])
    z = max(surface_h - GRASP_DESCEND_M, camera.table_height)
    return GraspAction(
        position=(float(point[0]), float(point[1]), z),
        angle_deg=grasp_angle(mask),
    )


def make_push(
    affordance: AffordanceMap,
    end_point_world: np.ndarray,
    depth: DepthMap | None,
    camera: CameraModel,
) -> PushAction:
    """Push from the affordance peak toward a world end point.

    The direction is the in-plane normalization of (end - start); the stroke
    length is always 0.13 m no matter how far the end point is.
    """
    if depth is None:
        raise DepthMissing("push start height comes from the depth map")
    peak = affordance.argmax_pixel()
    start = pixel_to_world(peak, depth, camera)
    end = np.asarray(end_point_world, dtype=np.float64)
    planar = end[:2] - start[:2]
    dist = float(np.linalg.norm(planar))
    if dist < MIN_PUSH_PLANAR_M:
        raise DegenerateDirection(
            f"push end within {dist * 1000:.3f} mm of start in the table plane"
        )
    d = planar / dist
    return PushAction(
        start=(float(start[0]), float(start[1]), float(start[2])),
        direction=(float(d[0]), float(d[1]), 0.0),
    )


def parse_action_record(text: str):
    """Inverse of GraspAction/PushAction.serialize for CLI and sim input."""
    parts = text.strip().split("\t")
    kind = parts[0]
    fields = dict(zip(parts[1::2], parts[2::2]))
    pos = tuple(float(v) for v in fields["position_m"].split())
    if kind == "grasp":
        return GraspAction(position=pos, angle_deg=float(fields["angle_deg"]))
    if kind == "push":
        direction = tuple(float(v) for v in fields["direction"].split())
        return PushAction(start=pos, direction=direction, length_m=float(fields["length_m"]))
    raise ValueError(f"unknown action record kind {kind!r}")
