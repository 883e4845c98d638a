"""Scene, object, and task types for the deterministic tabletop world."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..data import CameraModel
from ..geometry import (
    min_area_rect,
    polygon_centroid,
    transform_polygon,
    wrap_axis_angle,
)


@dataclass(frozen=True)
class ObjectPart:
    """Named sub-region of a footprint, in object frame."""

    name: str
    polygon: np.ndarray
    shade: float = 1.0


@dataclass(frozen=True)
class SimObject:
    """Convex slab on the table with labeled part regions."""

    instance_id: str
    category: str
    footprint: np.ndarray            # object-frame convex polygon (x, y)
    pose: tuple[float, float, float]  # (x, y, yaw radians)
    height: float
    parts: tuple[ObjectPart, ...]
    color_hsv: tuple[float, float, float] = (0.0, 0.0, 0.8)

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("object height must be positive")

    def world_footprint(self) -> np.ndarray:
        x, y, yaw = self.pose
        return transform_polygon(self.footprint, (x, y), yaw)

    def world_part(self, name: str) -> np.ndarray:
        for part in self.parts:
            if part.name == name:
                x, y, yaw = self.pose
                return transform_polygon(part.polygon, (x, y), yaw)
        raise KeyError(f"object {self.instance_id} has no part {name!r}")

    def part_names(self) -> list[str]:
        return [p.name for p in self.parts]

    def moved_by(self, delta_xy: np.ndarray) -> "SimObject":
        x, y, yaw = self.pose
        return replace(self, pose=(x + float(delta_xy[0]), y + float(delta_xy[1]), yaw))


@dataclass(frozen=True)
class SimScene:
    """Objects in a bounded workspace seen by a fixed top-down camera."""

    objects: tuple[SimObject, ...]
    bounds: tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)
    camera: CameraModel
    seed: int = 0
    image_hw: tuple[int, int] = (128, 128)

    def find(self, category: str) -> SimObject | None:
        for obj in self.objects:
            if obj.category == category:
                return obj
        return None

    def replace_object(self, old: SimObject, new: SimObject) -> "SimScene":
        objs = tuple(new if o is old else o for o in self.objects)
        return replace(self, objects=objs)


GRASP = "grasp"
PUSH = "push"

DIRECTION_VECTORS = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "forward": (0.0, -1.0),
    "backward": (0.0, 1.0),
}


@dataclass(frozen=True)
class Task:
    """One evaluation episode: a scene, an instruction, a success predicate."""

    task_id: str
    scene: SimScene
    scene_index: int
    instruction: str
    kind: str                      # GRASP or PUSH
    target_category: str
    part_name: str | None = None   # grasp tasks
    direction: tuple[float, float] | None = None  # push tasks, world (dx, dy)
    min_displacement: float = 0.05
    split: str = "seen"

    def __post_init__(self):
        target = self.scene.find(self.target_category)
        if target is None:
            raise ValueError(f"task targets unknown category {self.target_category!r}")
        if self.kind == GRASP:
            if self.part_name not in target.part_names():
                raise ValueError(
                    f"task references missing part {self.part_name!r} on {self.target_category}"
                )
        elif self.kind == PUSH:
            if self.direction is None:
                raise ValueError("push task needs a direction")
        else:
            raise ValueError(f"unknown task kind {self.kind!r}")


def polygon_axis_angle(polygon_world: np.ndarray) -> float:
    """Long-axis tilt of a world polygon in the shared image-angle convention.

    World y grows with image rows, so the y axis is negated before fitting
    the box; mask-derived and polygon-derived angles then agree.
    """
    pts = np.asarray(polygon_world, dtype=np.float64).copy()
    pts[:, 1] = -pts[:, 1]
    _, _, _, angle = min_area_rect(pts)
    return angle


def polygon_grasp_angle(polygon_world: np.ndarray) -> float:
    """Short-edge tilt of a world polygon's box: the angle a jaw should take."""
    return wrap_axis_angle(polygon_axis_angle(polygon_world) + 90.0)


def polygon_center(polygon_world: np.ndarray) -> np.ndarray:
    return polygon_centroid(polygon_world)
