"""Action execution and scoring in the quasi-static tabletop world."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..actions import GraspAction, PushAction
from ..geometry import axis_angle_difference, point_in_polygon, ray_segment_entry
from .scene import GRASP, PUSH, SimScene, Task, polygon_grasp_angle

GRASP_ANGLE_WINDOW_DEG = 15.0
PUSH_DIRECTION_WINDOW_DEG = 30.0


@dataclass(frozen=True)
class StepOutcome:
    success: bool
    reason: str


def step_grasp(scene: SimScene, action: GraspAction, task: Task) -> StepOutcome:
    """Score a grasp: inside the target part, jaw angle aligned, sane height.

    The first failed clause names the outcome reason.
    """
    if task.kind != GRASP:
        return StepOutcome(False, "action type mismatch: task expects a push")
    target = scene.find(task.target_category)
    part_world = target.world_part(task.part_name)
    x, y, z = action.position

    if not point_in_polygon(np.array([x, y]), part_world):
        return StepOutcome(False, "position outside target part")
    part_angle = polygon_grasp_angle(part_world)
    if axis_angle_difference(action.angle_deg, part_angle) > GRASP_ANGLE_WINDOW_DEG:
        return StepOutcome(
            False,
            f"angle outside window: jaw {action.angle_deg:.1f} deg vs part {part_angle:.1f} deg",
        )
    if not (scene.camera.table_height <= z <= target.height):
        return StepOutcome(False, f"height {z:.3f} outside [table, object top]")
    return StepOutcome(True, "grasped target part")


def _travel_allowance(
    footprint: np.ndarray, direction: np.ndarray, bounds: tuple[float, float, float, float]
) -> float:
    """How far the footprint can translate along direction inside bounds."""
    x_min, y_min, x_max, y_max = bounds
    allowance = np.inf
    for vx, vy in footprint:
        for d, lo, hi, v in ((direction[0], x_min, x_max, vx), (direction[1], y_min, y_max, vy)):
            if d > 1e-12:
                allowance = min(allowance, (hi - v) / d)
            elif d < -1e-12:
                allowance = min(allowance, (lo - v) / d)
    return max(0.0, float(allowance))


def step_push(
    scene: SimScene, action: PushAction, task: Task
) -> tuple[StepOutcome, SimScene]:
    """Sweep a point tip along the push line; translate the first object hit.

    The contacted object moves by the remaining stroke length along the push
    direction, clipped so it stays inside the workspace; nothing else moves.
    """
    origin = np.array(action.start[:2], dtype=np.float64)
    direction = np.array(action.direction[:2], dtype=np.float64)

    hit_obj = None
    hit_t = np.inf
    for obj in scene.objects:
        t = ray_segment_entry(origin, direction, obj.world_footprint())
        if t is not None and t < min(hit_t, action.length_m):
            hit_obj, hit_t = obj, t

    if hit_obj is None:
        outcome = _score_push(task, moved=None, displacement=0.0, direction=direction)
        return outcome, scene

    remaining = action.length_m - hit_t
    allowance = _travel_allowance(hit_obj.world_footprint(), direction, scene.bounds)
    displacement = min(remaining, allowance)
    moved = hit_obj.moved_by(direction * displacement)
    new_scene = scene.replace_object(hit_obj, moved)
    outcome = _score_push(task, moved=hit_obj, displacement=displacement, direction=direction)
    return outcome, new_scene


def _score_push(task: Task, moved, displacement: float, direction: np.ndarray) -> StepOutcome:
    if task.kind != PUSH:
        return StepOutcome(False, "action type mismatch: task expects a grasp")
    if moved is None:
        return StepOutcome(False, "no contact")
    if moved.category != task.target_category:
        return StepOutcome(False, f"pushed wrong object: {moved.category}")
    if displacement < task.min_displacement:
        return StepOutcome(
            False, f"displacement {displacement:.3f} m below minimum {task.min_displacement} m"
        )
    want = np.array(task.direction, dtype=np.float64)
    want = want / np.linalg.norm(want)
    cosine = float(np.clip(np.dot(direction, want), -1.0, 1.0))
    angle = float(np.degrees(np.arccos(cosine)))
    if angle > PUSH_DIRECTION_WINDOW_DEG:
        return StepOutcome(False, f"direction off by {angle:.1f} deg")
    return StepOutcome(True, f"pushed target {displacement:.3f} m")
